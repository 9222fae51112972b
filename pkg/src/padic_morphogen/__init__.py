"""Reaction-diffusion Turing systems on p-adic grids.

Modules:
    padic: exact p-adic arithmetic, the grid G_{L,M}, Kozyrev wavelets.
    vladimirov: the discretized Vladimirov operator (dense, fast and spectral forms).
    turing: kinetics models and Turing instability analysis.
    simulate: time integration, mode projection, clusters.
    cli: the ``padic-morphogen`` command.
"""

from .errors import (
    DenseCapExceeded,
    GeometryError,
    KineticsError,
    NoTuringBifurcation,
    OperatorError,
    PadicMorphogenError,
    SimulationBlowup,
    SimulationError,
    SpectrumMismatchError,
    SteadyStateError,
)
from .padic import (
    GridGeometry,
    GridPoint,
    PadicConfig,
    WaveletIndex,
    additive_character,
    admissible_wavelets,
    fractional_part,
    grid_distance_norm,
    grid_enumerate,
    padic_norm,
    padic_order,
    real_wavelet_eval,
    wavelet_eval,
    wavelet_samples,
)
from .simulate import (
    SimulationConfig,
    SimulationState,
    cluster_analysis,
    initial_condition,
    linear_forecast,
    measure_growth_rate,
    project_modes,
    reaction_eval,
    run,
    step,
)
from .turing import (
    KineticsModel,
    brusselator,
    critical_diffusion,
    dispersion,
    find_steady_state,
    h_of_kappa,
    kappa_band,
    kappa_extrema,
    schnakenberg,
    stability_0d,
    turing_report,
)
from .vladimirov import (
    OperatorConstants,
    VladimirovOperator,
    analytic_spectrum,
    apply_dense,
    apply_fast,
    assemble,
    dalpha_on_indicator,
    heat_kernel,
    verify_spectrum,
)

__version__ = "0.1.0"
