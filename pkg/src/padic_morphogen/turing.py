"""Two-species kinetics and Turing instability analysis on the grid spectrum.

Linearizing ``u_t = gamma f - D u``, ``v_t = gamma g - d D v`` around a
homogeneous steady state and projecting on an eigenfunction of ``D`` with
eigenvalue ``kappa`` gives the dispersion relation

    lambda^2 + (kappa (1 + d) - gamma Tr J) lambda + h(kappa) = 0,
    h(kappa) = d kappa^2 - gamma kappa (d f_u + g_v) + gamma^2 det J.

On the grid the admissible ``kappa`` are ``p^{(1-r) alpha}``, ``r = 1-L..M``.
"""

from __future__ import annotations

import cmath
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import _io
from .errors import KineticsError, NoTuringBifurcation, SteadyStateError
from .padic import GridGeometry
from .vladimirov import OperatorConstants, scale_eigenvalues

MARGINAL_RTOL = 1e-12


@dataclass(frozen=True)
class KineticsModel:
    """Reaction pair ``(f, g)`` with analytic Jacobian.

    ``f``, ``g`` and ``jacobian`` take ``(u, v, params)`` and must work on
    numpy arrays elementwise.
    """

    name: str
    params: dict
    f_fn: Callable
    g_fn: Callable
    jac_fn: Callable
    gamma: float = 1.0
    d: float = 1.0
    steady_fn: Callable | None = None

    def __post_init__(self):
        for key in ("gamma", "d"):
            val = getattr(self, key)
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise KineticsError(f"{key} must be a positive real, got {val!r}")
        for key, val in self.params.items():
            if not (isinstance(val, (int, float)) and math.isfinite(val)):
                raise KineticsError(f"parameter {key} must be a finite real, got {val!r}")

    def f(self, u, v):
        return self.f_fn(u, v, self.params)

    def g(self, u, v):
        return self.g_fn(u, v, self.params)

    def jacobian(self, u, v) -> np.ndarray:
        return np.array(self.jac_fn(u, v, self.params), dtype=float)

    def closed_form_steady_state(self):
        return None if self.steady_fn is None else self.steady_fn(self.params)

    def with_params(self, **changes) -> "KineticsModel":
        """Copy with updated ``gamma``, ``d`` or reaction parameters."""
        top = {k: changes.pop(k) for k in ("gamma", "d") if k in changes}
        params = dict(self.params)
        unknown = set(changes) - set(params)
        if unknown:
            raise KineticsError(f"unknown parameters for {self.name}: {sorted(unknown)}")
        params.update(changes)
        return replace(self, params=params, **top)


def _schnakenberg_f(u, v, q):
    return q["a"] - u + u * u * v


def _schnakenberg_g(u, v, q):
    return q["b"] - u * u * v


def _schnakenberg_jac(u, v, q):
    return [[-1.0 + 2.0 * u * v, u * u], [-2.0 * u * v, -u * u]]


def _schnakenberg_steady(q):
    s = q["a"] + q["b"]
    return s, q["b"] / (s * s)


def _brusselator_f(u, v, q):
    return q["a"] - (q["b"] + 1.0) * u + u * u * v


def _brusselator_g(u, v, q):
    return q["b"] * u - u * u * v


def _brusselator_jac(u, v, q):
    return [[-(q["b"] + 1.0) + 2.0 * u * v, u * u], [q["b"] - 2.0 * u * v, -u * u]]


def _brusselator_steady(q):
    return q["a"], q["b"] / q["a"]


def schnakenberg(a: float = 0.2, b: float = 1.3, gamma: float = 1.0, d: float = 1.0) -> KineticsModel:
    """``f = a - u + u^2 v``, ``g = b - u^2 v``; steady state ``(a+b, b/(a+b)^2)``."""
    return KineticsModel("schnakenberg", {"a": float(a), "b": float(b)}, _schnakenberg_f,
                         _schnakenberg_g, _schnakenberg_jac, float(gamma), float(d),
                         _schnakenberg_steady)


def brusselator(a: float = 1.0, b: float = 3.0, gamma: float = 1.0, d: float = 1.0) -> KineticsModel:
    """``f = a - (b+1) u + u^2 v``, ``g = b u - u^2 v``; steady state ``(a, b/a)``."""
    return KineticsModel("brusselator", {"a": float(a), "b": float(b)}, _brusselator_f,
                         _brusselator_g, _brusselator_jac, float(gamma), float(d),
                         _brusselator_steady)


KINETICS = {"schnakenberg": schnakenberg, "brusselator": brusselator}


def make_kinetics(name: str, params: dict | None = None, gamma: float = 1.0, d: float = 1.0):
    try:
        factory = KINETICS[name]
    except KeyError:
        raise KineticsError(f"unknown kinetics {name!r}; available: {sorted(KINETICS)}") from None
    try:
        return factory(gamma=gamma, d=d, **(params or {}))
    except TypeError as exc:
        raise KineticsError(f"bad parameters for {name}: {exc}") from None


# ---------------------------------------------------------------------------
# Steady state and Jacobian
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SteadyState:
    u0: float
    v0: float
    residual: float


@dataclass(frozen=True)
class JacobianAtSteadyState:
    f_u: float
    f_v: float
    g_u: float
    g_v: float

    @property
    def trace(self) -> float:
        return self.f_u + self.g_v

    @property
    def det(self) -> float:
        return self.f_u * self.g_v - self.f_v * self.g_u

    def matrix(self) -> np.ndarray:
        return np.array([[self.f_u, self.f_v], [self.g_u, self.g_v]])

    @classmethod
    def from_matrix(cls, J) -> "JacobianAtSteadyState":
        J = np.asarray(J, dtype=float)
        return cls(float(J[0, 0]), float(J[0, 1]), float(J[1, 0]), float(J[1, 1]))


def _residual(model, u, v) -> float:
    return max(abs(float(model.f(u, v))), abs(float(model.g(u, v))))


def find_steady_state(model: KineticsModel, initial_guess=(1.0, 1.0), tol: float = 1e-12,
                      max_iter: int = 100) -> SteadyState:
    """Positive zero of ``(f, g)``.

    Built-in models use their closed form; otherwise damped Newton with the
    analytic Jacobian, halving the step until the residual decreases.
    """
    closed = model.closed_form_steady_state()
    if closed is not None:
        u, v = (float(c) for c in closed)
        if not (math.isfinite(u) and math.isfinite(v)):
            raise SteadyStateError(f"closed-form steady state of {model.name} is not finite")
        trace = [(0, u, v, _residual(model, u, v))]
    else:
        u, v = (float(c) for c in initial_guess)
        if u <= 0 or v <= 0:
            raise SteadyStateError("initial guess must lie in the positive quadrant")
        res = _residual(model, u, v)
        trace = [(0, u, v, res)]
        for it in range(1, max_iter + 1):
            if res <= tol:
                break
            F = np.array([model.f(u, v), model.g(u, v)], dtype=float)
            try:
                du, dv = np.linalg.solve(model.jacobian(u, v), -F)
            except np.linalg.LinAlgError:
                raise SteadyStateError("singular Jacobian during Newton iteration", trace) from None
            step = 1.0
            while step > 1e-10:
                un, vn = u + step * du, v + step * dv
                rn = _residual(model, un, vn)
                if math.isfinite(rn) and rn < res:
                    break
                step *= 0.5
            u, v, res = un, vn, rn
            trace.append((it, u, v, res))
        else:
            if res > tol:
                raise SteadyStateError(f"Newton did not converge in {max_iter} iterations", trace)
    res = _residual(model, u, v)
    if res > tol:
        raise SteadyStateError(f"steady-state residual {res:.3e} exceeds {tol:.0e}", trace)
    if not (u > 0 and v > 0):
        raise SteadyStateError(f"steady state ({u}, {v}) is not positive", trace)
    return SteadyState(u, v, res)


def jacobian_at(model: KineticsModel, steady: SteadyState) -> JacobianAtSteadyState:
    return JacobianAtSteadyState.from_matrix(model.jacobian(steady.u0, steady.v0))


# ---------------------------------------------------------------------------
# Linear analysis
# ---------------------------------------------------------------------------


def _quadratic_roots(b: float, c: float) -> tuple[complex, complex]:
    """Roots of ``x^2 + b x + c`` without cancellation; larger real part first."""
    disc = b * b - 4.0 * c
    if disc >= 0:
        q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
        if q == 0:
            return 0j, 0j
        r1, r2 = q, c / q
        return (complex(max(r1, r2)), complex(min(r1, r2)))
    sq = cmath.sqrt(disc)
    return (-b + sq) / 2.0, (-b - sq) / 2.0


@dataclass(frozen=True)
class Stability0D:
    lambda1: complex
    lambda2: complex
    stable: bool
    sufficient: bool


def stability_0d(jac: JacobianAtSteadyState, gamma: float) -> Stability0D:
    """Roots of ``lambda^2 - gamma Tr lambda + gamma^2 det = 0``."""
    l1, l2 = _quadratic_roots(-gamma * jac.trace, gamma * gamma * jac.det)
    stable = l1.real < 0 and l2.real < 0
    return Stability0D(l1, l2, stable, jac.trace < 0 and jac.det > 0)


def h_of_kappa(jac: JacobianAtSteadyState, gamma: float, d: float, kappa: float) -> float:
    return d * kappa * kappa - gamma * kappa * (d * jac.f_u + jac.g_v) + gamma * gamma * jac.det


def dispersion(jac: JacobianAtSteadyState, gamma: float, d: float, kappa: float):
    """Both growth rates at wavenumber ``kappa``, larger real part first."""
    b = kappa * (1.0 + d) - gamma * jac.trace
    return _quadratic_roots(b, h_of_kappa(jac, gamma, d, kappa))


def lambda_plus(jac, gamma, d, kappa) -> float:
    return dispersion(jac, gamma, d, kappa)[0].real


def h_min_of_d(jac: JacobianAtSteadyState, gamma: float, d: float) -> float:
    B = d * jac.f_u + jac.g_v
    return gamma * gamma * (jac.det - B * B / (4.0 * d))


@dataclass(frozen=True)
class CriticalDiffusion:
    d_c: float
    roots: tuple[float, ...]


def critical_diffusion(jac: JacobianAtSteadyState) -> CriticalDiffusion:
    """Critical ratio ``d_c`` from ``f_u^2 d^2 + 2(2 f_v g_u - f_u g_v) d + g_v^2 = 0``.

    The root is the one ``> 1`` at which ``h_min`` changes sign from positive
    to negative as ``d`` increases (and where ``d f_u + g_v > 0`` so the
    vertex of ``h`` lies at positive ``kappa``).

    Raises:
        KineticsError: if ``f_u == 0``.
        NoTuringBifurcation: if no root qualifies.
    """
    a = jac.f_u * jac.f_u
    if a == 0:
        raise KineticsError("critical diffusion requires f_u != 0")
    b = 2.0 * (2.0 * jac.f_v * jac.g_u - jac.f_u * jac.g_v)
    c = jac.g_v * jac.g_v
    disc = b * b - 4.0 * a * c
    if disc < 0:
        raise NoTuringBifurcation("no Turing bifurcation for these kinetics (complex roots)")
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    roots = sorted({q / a, c / q} if q != 0 else {0.0})
    good = []
    for root in roots:
        if not root > 1:
            continue
        delta = 1e-6 * root
        before = h_min_of_d(jac, 1.0, root - delta)
        after = h_min_of_d(jac, 1.0, root + delta)
        if before > 0 > after and root * jac.f_u + jac.g_v > 0:
            good.append(root)
    if not good:
        raise NoTuringBifurcation("no Turing bifurcation for these kinetics "
                                  f"(roots {roots}, none > 1 with h_min crossing zero)")
    if len(good) > 1:
        raise NoTuringBifurcation(f"ambiguous critical diffusion: roots {good}")
    d_c = good[0]
    lhs = jac.det
    rhs = (d_c * jac.f_u + jac.g_v) ** 2 / (4.0 * d_c)
    if abs(lhs - rhs) > 1e-9 * abs(lhs):
        raise KineticsError(f"critical diffusion check failed: det={lhs} vs {rhs}")
    return CriticalDiffusion(d_c, tuple(roots))


@dataclass(frozen=True)
class KappaExtrema:
    kappa_min: float
    h_min: float
    kappa_c: float | None = None
    kappa_c_alt: float | None = None


def kappa_extrema(jac: JacobianAtSteadyState, gamma: float, d: float,
                  d_c: float | None = None) -> KappaExtrema:
    """Vertex of ``h``; with ``d_c`` also both expressions for ``kappa_c``."""
    if not d > 0:
        raise KineticsError(f"d must be > 0, got {d}")
    B = d * jac.f_u + jac.g_v
    kmin = gamma * B / (2.0 * d)
    hmin = gamma * gamma * (jac.det - B * B / (4.0 * d))
    kc = kc_alt = None
    if d_c is not None:
        kc = gamma * (d_c * jac.f_u + jac.g_v) / (2.0 * d_c)
        kc_alt = gamma * math.sqrt(jac.det / d_c)
    return KappaExtrema(kmin, hmin, kc, kc_alt)


def kappa_band(jac: JacobianAtSteadyState, gamma: float, d: float) -> tuple[float, float] | None:
    """Roots ``kappa1 < kappa2`` of ``h``; ``None`` when the band is empty."""
    B = d * jac.f_u + jac.g_v
    disc = B * B - 4.0 * d * jac.det
    if disc <= 0 or B <= 0 or jac.det <= 0:
        return None
    k2 = gamma * (B + math.sqrt(disc)) / (2.0 * d)
    k1 = gamma * gamma * jac.det / (d * k2)
    return k1, k2


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UnstableScale:
    r: int
    kappa: float
    multiplicity: int
    lambda_plus: float


@dataclass
class TuringReport:
    model: str
    params: dict
    gamma: float
    d: float
    p: int
    M: int
    L: int
    alpha: float
    steady: SteadyState
    jac: JacobianAtSteadyState
    conditions: dict
    d_c: float | None
    kappa_c: float | None
    kappa_min: float
    h_min: float
    kappa1: float | None
    kappa2: float | None
    unstable_scales: list[UnstableScale]
    marginal_scales: list[int]
    dominant_scale: int | None
    lambda_M: float
    lambda_M_in_band: bool
    stability: Stability0D
    dispersion_samples: list[tuple[float, float, float]] = field(default_factory=list)

    @property
    def turing_unstable(self) -> bool:
        return all(c["holds"] for c in self.conditions.values())

    @property
    def verdict(self) -> str:
        return "Turing unstable" if self.turing_unstable else "stable"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "model": self.model,
            "params": dict(self.params),
            "gamma": self.gamma,
            "d": self.d,
            "grid": {"p": self.p, "M": self.M, "L": self.L},
            "alpha": self.alpha,
            "steady_state": {"u0": self.steady.u0, "v0": self.steady.v0,
                             "residual": self.steady.residual},
            "jacobian": {"f_u": self.jac.f_u, "f_v": self.jac.f_v, "g_u": self.jac.g_u,
                         "g_v": self.jac.g_v, "trace": self.jac.trace, "det": self.jac.det},
            "stability_0d": {
                "lambda1": [self.stability.lambda1.real, self.stability.lambda1.imag],
                "lambda2": [self.stability.lambda2.real, self.stability.lambda2.imag],
                "stable": self.stability.stable,
            },
            "conditions": self.conditions,
            "d_c": self.d_c,
            "kappa_c": self.kappa_c,
            "kappa_min": self.kappa_min,
            "h_min": self.h_min,
            "kappa1": self.kappa1,
            "kappa2": self.kappa2,
            "unstable_scales": [
                {"r": s.r, "kappa": s.kappa, "multiplicity": s.multiplicity,
                 "lambda_plus": s.lambda_plus} for s in self.unstable_scales
            ],
            "marginal_scales": self.marginal_scales,
            "dominant_scale": self.dominant_scale,
            "lambda_M": self.lambda_M,
            "lambda_M_in_band": self.lambda_M_in_band,
            "dispersion_samples": [list(s) for s in self.dispersion_samples],
        }

    def to_text(self) -> str:
        out = io.StringIO()
        w = out.write
        w(f"model        {self.model} {self.params}\n")
        w(f"gamma, d     {self.gamma:.17g}, {self.d:.17g}\n")
        w(f"grid         p={self.p} M={self.M} L={self.L} alpha={self.alpha:.17g}\n")
        w(f"steady state u0={self.steady.u0:.17g} v0={self.steady.v0:.17g}\n")
        w(f"Tr J, det J  {self.jac.trace:.17g}, {self.jac.det:.17g}\n")
        w(f"d_c          {self.d_c if self.d_c is None else format(self.d_c, '.17g')}\n")
        band = "empty" if self.kappa1 is None else f"({self.kappa1:.17g}, {self.kappa2:.17g})"
        w(f"band         {band}\n")
        w("\ncondition  holds  value\n")
        for name, c in self.conditions.items():
            w(f"{name:<10} {str(c['holds']):<6} {c['value']}\n")
        w("\n    r          kappa  mult        lambda_plus\n")
        for s in self.unstable_scales:
            w(f"{s.r:>5} {s.kappa:>14.6g} {s.multiplicity:>5} {s.lambda_plus:>18.10g}\n")
        w(f"\nverdict: {self.verdict}\n")
        return out.getvalue()


def dispersion_grid(geometry: GridGeometry, alpha: float, count: int = 200) -> np.ndarray:
    """Log-spaced kappa over ``[p^{(1-M) alpha} / p, p^{L alpha} p]``."""
    p = geometry.p
    lo = float(p) ** ((1 - geometry.M) * alpha) / p
    hi = float(p) ** (geometry.L * alpha) * p
    return np.logspace(math.log10(lo), math.log10(hi), count)


def _marginal(kappa, edge) -> bool:
    return edge is not None and abs(kappa - edge) <= MARGINAL_RTOL * abs(edge)


def turing_report(model: KineticsModel, geometry: GridGeometry, alpha,
                  initial_guess=(1.0, 1.0), samples: int = 200) -> TuringReport:
    """Evaluate the six Turing conditions on the grid spectrum.

    T6 uses the wavelet eigenvalues only; whether ``lambda_M`` falls in the
    band is reported separately.  Eigenvalues within a relative ``1e-12`` of
    a band edge are listed as marginal and do not count as unstable.
    """
    if model.d == 1:
        raise KineticsError("diffusion ratio d = 1 cannot produce a Turing instability; need d != 1")
    consts = OperatorConstants.create(geometry.p, alpha, geometry.M)
    alpha = consts.alpha
    steady = find_steady_state(model, initial_guess)
    jac = jacobian_at(model, steady)
    gamma, d = model.gamma, model.d
    B = d * jac.f_u + jac.g_v
    disc = B * B - 4.0 * d * jac.det
    try:
        d_c = critical_diffusion(jac).d_c
    except NoTuringBifurcation:
        d_c = None
    except KineticsError:
        d_c = None
    ext = kappa_extrema(jac, gamma, d, d_c)
    band = kappa_band(jac, gamma, d)
    k1, k2 = band if band is not None else (None, None)
    unstable, marginal = [], []
    for r, kappa, mult in scale_eigenvalues(geometry, alpha):
        if band is None:
            continue
        if _marginal(kappa, k1) or _marginal(kappa, k2):
            marginal.append(r)
        elif k1 < kappa < k2:
            unstable.append(UnstableScale(r, kappa, mult, lambda_plus(jac, gamma, d, kappa)))
    conditions = {
        "T1": {"holds": jac.trace < 0, "value": jac.trace},
        "T2": {"holds": jac.det > 0, "value": jac.det},
        "T3": {"holds": B > 0, "value": B},
        "T4": {"holds": jac.f_u * jac.g_v < 0, "value": jac.f_u * jac.g_v},
        "T5": {"holds": disc > 0, "value": disc},
        "T6": {"holds": bool(unstable), "value": [s.r for s in unstable]},
    }
    dominant = max(unstable, key=lambda s: s.lambda_plus).r if unstable else None
    lam_in = band is not None and k1 < consts.lambda_M < k2
    samples_out = []
    for kappa in dispersion_grid(geometry, alpha, samples):
        l1, l2 = dispersion(jac, gamma, d, float(kappa))
        samples_out.append((float(kappa), l1.real, l2.real))
    return TuringReport(
        model=model.name, params=dict(model.params), gamma=gamma, d=d, p=geometry.p,
        M=geometry.M, L=geometry.L, alpha=alpha, steady=steady, jac=jac,
        conditions=conditions, d_c=d_c, kappa_c=ext.kappa_c, kappa_min=ext.kappa_min,
        h_min=ext.h_min, kappa1=k1, kappa2=k2, unstable_scales=unstable,
        marginal_scales=marginal, dominant_scale=dominant, lambda_M=consts.lambda_M,
        lambda_M_in_band=lam_in, stability=stability_0d(jac, gamma),
        dispersion_samples=samples_out,
    )


def brute_force_unstable_scales(model: KineticsModel, geometry: GridGeometry, alpha) -> list[int]:
    """Scales whose dispersion has ``Re lambda_+ > 0``, by direct evaluation."""
    steady = find_steady_state(model)
    jac = jacobian_at(model, steady)
    return [r for r, kappa, _ in scale_eigenvalues(geometry, alpha)
            if lambda_plus(jac, model.gamma, model.d, kappa) > 0]


def write_report_json(report: TuringReport, path) -> None:
    _io.write_json(path, report.to_dict())


def write_report_text(report: TuringReport, path) -> None:
    _io.write_text(path, report.to_text())


def write_dispersion_csv(report: TuringReport, path) -> None:
    _io.write_csv(path, ["kappa", "re_lambda1", "re_lambda2"], report.dispersion_samples)
