"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations


class PadicMorphogenError(Exception):
    """Base class for all library errors."""


class GeometryError(PadicMorphogenError, ValueError):
    """Invalid grid parameters, or points/wavelets from the wrong grid."""


class OperatorError(PadicMorphogenError, ValueError):
    """Invalid operator parameters or a request beyond the dense cap."""


class DenseCapExceeded(OperatorError):
    def __init__(self, n: int, cap: int):
        super().__init__(
            f"N={n} exceeds the dense cap {cap}; use apply_fast / analytic_spectrum "
            f"or raise the cap"
        )
        self.n = n
        self.cap = cap


class SpectrumMismatchError(PadicMorphogenError):
    """Numerical spectrum of the assembled matrix disagrees with the analytic one."""

    def __init__(self, message: str, offending: list, report=None):
        super().__init__(message)
        self.offending = offending
        self.report = report


class KineticsError(PadicMorphogenError, ValueError):
    """Invalid reaction kinetics or parameters."""


class NoTuringBifurcation(KineticsError):
    pass


class SteadyStateError(PadicMorphogenError, RuntimeError):
    def __init__(self, message: str, trace: list | None = None):
        super().__init__(message)
        self.trace = trace or []


class SimulationError(PadicMorphogenError, ValueError):
    """Invalid simulation configuration."""


class SimulationBlowup(PadicMorphogenError, RuntimeError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, message: str, last_state, step: int, trajectory=None):
        super().__init__(message)
        self.last_state = last_state
        self.step = step
        self.trajectory = trajectory or []
