"""Time integration of the discretized reaction-diffusion system on G_{L,M}.

The fields are ``u = u0 + w_u`` and ``v = v0 + w_v`` around the homogeneous
steady state, and diffusion acts on the deviations:

    du/dt = gamma f(u, v) - A (u - u0)
    dv/dt = gamma g(u, v) - d A (v - v0)

so that the steady state is an exact fixed point.  Mode projections use the
real wavelet pairs; all wavelets branching at one tree level share an
eigenvalue, which makes per-level projections enough for the linear forecast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
import scipy.linalg

from . import _io
from .errors import SimulationBlowup, SimulationError
from .padic import GridGeometry, WaveletIndex, _phase_table
from .turing import (
    KineticsModel,
    find_steady_state,
    jacobian_at,
    kappa_band,
    lambda_plus,
)
from .vladimirov import (
    VladimirovOperator,
    apply_fast,
    assemble,
    level_components,
    LevelMultiplier,
    wavelet_eigenvalue,
)

SCHEMES = ("imex_euler", "rk4")
RK4_GUARD = 2.5


@dataclass(frozen=True)
class SimulationConfig:
    """Parameters of one run.

    ``reference`` overrides the state that diffusion relaxes towards; by
    default it is the steady state of ``model``.
    """

    geometry: GridGeometry
    alpha: float
    model: KineticsModel
    t_end: float
    dt: float
    scheme: str = "imex_euler"
    epsilon: float = 0.01
    seed: int = 0
    snapshot_stride: int = 1
    paper_literal: bool = False
    reference: tuple[float, float] | None = None
    initial_guess: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise SimulationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise SimulationError(f"dt must be > 0, got {self.dt}")
        if not (math.isfinite(self.t_end) and self.t_end >= 0):
            raise SimulationError(f"t_end must be >= 0, got {self.t_end}")
        if not 0 <= self.epsilon < 1:
            raise SimulationError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise SimulationError(f"snapshot_stride must be a positive integer, got {self.snapshot_stride}")
        if not 0 <= int(self.seed) < 2**64:
            raise SimulationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        self.n_steps  # validates t_end / dt

    @property
    def n_steps(self) -> int:
        steps = round(self.t_end / self.dt)
        if abs(steps * self.dt - self.t_end) > 1e-9 * max(self.t_end, self.dt):
            raise SimulationError(f"t_end={self.t_end} is not a multiple of dt={self.dt}")
        return int(steps)

    def with_(self, **changes) -> "SimulationConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class SimulationState:
    t: float
    u: np.ndarray
    v: np.ndarray
    step: int = 0

    def deviation(self, u0: float, v0: float) -> tuple[np.ndarray, np.ndarray]:
        return self.u - u0, self.v - v0


@dataclass
class RunResult:
    config: SimulationConfig
    reference: tuple[float, float]
    trajectory: list[SimulationState]
    final: SimulationState


def reference_state(config: SimulationConfig) -> tuple[float, float]:
    if config.reference is not None:
        return float(config.reference[0]), float(config.reference[1])
    st = find_steady_state(config.model, config.initial_guess)
    return st.u0, st.v0


def initial_condition(config: SimulationConfig, reference=None) -> SimulationState:
    """Steady state plus a seeded zero-mean uniform perturbation.

    ``delta_u`` is uniform in ``[-eps u0, eps u0]`` (likewise ``delta_v``) and
    then has its grid mean removed.
    """
    u0, v0 = reference if reference is not None else reference_state(config)
    N = config.geometry.N
    u = np.full(N, u0)
    v = np.full(N, v0)
    if config.epsilon > 0:
        rng = np.random.default_rng(int(config.seed))
        du = rng.uniform(-config.epsilon * abs(u0), config.epsilon * abs(u0), N)
        dv = rng.uniform(-config.epsilon * abs(v0), config.epsilon * abs(v0), N)
        u = u + (du - du.mean())
        v = v + (dv - dv.mean())
        if (u < 0).any() or (v < 0).any():
            raise SimulationError("perturbation makes the initial state negative; reduce epsilon")
    return SimulationState(0.0, u, v, 0)


def reaction_eval(model: KineticsModel, state: SimulationState) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise ``f(u_I, v_I)`` and ``g(u_I, v_I)``."""
    fu = np.asarray(model.f(state.u, state.v), dtype=float)
    gv = np.asarray(model.g(state.u, state.v), dtype=float)
    if not (np.isfinite(fu).all() and np.isfinite(gv).all()):
        raise SimulationError(f"non-finite reaction terms at t={state.t}")
    return fu, gv


def rk4_stiffness(config: SimulationConfig, op: VladimirovOperator) -> float:
    mu_const, mu = op.level_eigenvalues()
    top = max([abs(mu_const)] + [abs(x) for x in mu])
    return config.dt * max(1.0, config.model.d) * top


class Stepper:
    """Advances a state by one ``dt`` with the configured scheme."""

    def __init__(self, config: SimulationConfig, op: VladimirovOperator, reference=None):
        if op.geometry != config.geometry:
            raise SimulationError("operator geometry differs from the configuration")
        self.config = config
        self.op = op
        self.u0, self.v0 = reference if reference is not None else reference_state(config)
        if config.scheme == "rk4":
            stiff = rk4_stiffness(config, op)
            if stiff > RK4_GUARD:
                raise SimulationError(
                    f"rk4 unstable: dt * max eigenvalue = {stiff:.3g} > {RK4_GUARD}; "
                    f"reduce dt or use imex_euler")
        dt, d = config.dt, config.model.d
        self._solve = LevelMultiplier.from_function(
            op, lambda lam: np.array([1.0 / (1.0 + dt * lam), 1.0 / (1.0 + dt * d * lam)]))
        self._ref = np.array([self.u0, self.v0])

    def _rhs(self, u, v):
        model, gamma = self.config.model, self.config.model.gamma
        diff = apply_fast(self.op, np.column_stack((u - self.u0, v - self.v0)))
        du = gamma * model.f(u, v) - diff[:, 0]
        dv = gamma * model.g(u, v) - model.d * diff[:, 1]
        return du, dv

    def __call__(self, state: SimulationState) -> SimulationState:
        cfg = self.config
        dt, model = cfg.dt, cfg.model
        if cfg.scheme == "imex_euler":
            fu, gv = reaction_eval(model, state)
            rhs = np.column_stack((state.u + dt * model.gamma * fu, state.v + dt * model.gamma * gv))
            w = self._solve(rhs - self._ref)
            u, v = self.u0 + w[:, 0], self.v0 + w[:, 1]
        else:
            u, v = state.u, state.v
            k1 = self._rhs(u, v)
            k2 = self._rhs(u + 0.5 * dt * k1[0], v + 0.5 * dt * k1[1])
            k3 = self._rhs(u + 0.5 * dt * k2[0], v + 0.5 * dt * k2[1])
            k4 = self._rhs(u + dt * k3[0], v + dt * k3[1])
            u = u + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
            v = v + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        step = state.step + 1
        return SimulationState(step * dt, u, v, step)


def step(config: SimulationConfig, operator: VladimirovOperator, state: SimulationState,
         reference=None) -> SimulationState:
    return Stepper(config, operator, reference)(state)


def _finite(state: SimulationState) -> bool:
    return bool(np.isfinite(state.u).all() and np.isfinite(state.v).all())


def run(config: SimulationConfig, operator: VladimirovOperator | None = None,
        initial: SimulationState | None = None) -> RunResult:
    """Integrate to ``t_end`` recording every ``snapshot_stride`` steps and the final state.

    Raises:
        SimulationBlowup: on non-finite values; carries the last finite state.
    """
    op = operator or assemble(config.geometry, config.alpha, config.paper_literal)
    reference = reference_state(config)
    stepper = Stepper(config, op, reference)
    state = initial if initial is not None else initial_condition(config, reference)
    trajectory = [state]
    n_steps, stride = config.n_steps, int(config.snapshot_stride)
    for k in range(1, n_steps + 1):
        try:
            # overflow is reported through the finiteness check below
            with np.errstate(over="ignore", invalid="ignore"):
                new = stepper(state)
        except SimulationError as exc:
            raise SimulationBlowup(str(exc), state, k, trajectory) from None
        if not _finite(new):
            raise SimulationBlowup(f"non-finite values at step {k} (t={k * config.dt:.6g})",
                                   state, k, trajectory)
        state = new
        if k % stride == 0 or k == n_steps:
            trajectory.append(state)
    return RunResult(config, reference, trajectory, state)


# ---------------------------------------------------------------------------
# Wavelet modes
# ---------------------------------------------------------------------------


@dataclass
class ModeSpectrum:
    """Real-wavelet coefficients of a field.

    Arrays are aligned with :func:`~padic_morphogen.padic.admissible_wavelets`
    (``r`` from ``M`` down, then offset ``a``, then ``j``).  ``power`` sums
    to the squared norm of the non-constant part.
    """

    geometry: GridGeometry
    r: np.ndarray
    a: np.ndarray
    j: np.ndarray
    amp_cos: np.ndarray
    amp_sin: np.ndarray
    constant_component: float

    @property
    def power(self) -> np.ndarray:
        return self.amp_cos**2 + self.amp_sin**2

    def n_values(self) -> list[Fraction]:
        M = self.geometry.M
        p = self.geometry.p
        return [Fraction(int(a), p ** (M - int(r))) for a, r in zip(self.a, self.r)]

    @property
    def entries(self) -> list[tuple[WaveletIndex, float, float, float]]:
        power = self.power
        return [(WaveletIndex(int(r), n, int(j)), float(c), float(s), float(pw))
                for r, n, j, c, s, pw in zip(self.r, self.n_values(), self.j, self.amp_cos,
                                             self.amp_sin, power)]

    def scale_power(self) -> dict[int, float]:
        out = {}
        for r, pw in zip(self.r, self.power):
            out[int(r)] = out.get(int(r), 0.0) + float(pw)
        return out

    def csv_rows(self):
        for (r, n, j), c, s, pw in zip(zip(self.r, self.n_values(), self.j), self.amp_cos,
                                        self.amp_sin, self.power):
            yield int(r), f"{n.numerator}/{n.denominator}", int(j), float(c), float(s), float(pw)


def project_modes(field_values, geometry: GridGeometry) -> ModeSpectrum:
    """Inner products of a real field with every real wavelet pair.

    Labels are ``I~ = a + p^s (d + p q)`` with ``a < p^s`` the support class
    and ``d`` the branching digit, so each level reduces to summing over
    ``q`` followed by a ``p``-point cosine/sine transform over ``d``.
    """
    f = np.asarray(field_values, dtype=float)
    if f.shape != (geometry.N,):
        raise SimulationError(f"field must have length {geometry.N}, got shape {f.shape}")
    p, n, M, L = geometry.p, geometry.levels, geometry.M, geometry.L
    w = geometry.cell_measure
    cos_t = _phase_table(p, "cos")
    sin_t = _phase_table(p, "sin")
    js = np.arange(1, p)
    phase_idx = (js[:, None] * np.arange(p)[None, :]) % p  # (j, d)
    C, S = cos_t[phase_idx], sin_t[phase_idx]
    rs, as_, jl, ac, asn = [], [], [], [], []
    for s in range(n):
        r = M - s
        T = f.reshape(p ** (n - s - 1), p, p**s).sum(axis=0)  # (d, a)
        amp = w * float(p) ** (-r / 2.0)
        cos_amp = amp * (C @ T)  # (j, a)
        sin_amp = amp * (S @ T)
        A, J = np.meshgrid(np.arange(p**s), js, indexing="ij")
        rs.append(np.full(A.size, r))
        as_.append(A.ravel())
        jl.append(J.ravel())
        ac.append(cos_amp.T.ravel())
        asn.append(sin_amp.T.ravel())
    const = w * float(p) ** (-M / 2.0) * f.sum()
    cat = (lambda xs, dt: np.concatenate(xs).astype(dt)) if n else (lambda xs, dt: np.zeros(0, dt))
    return ModeSpectrum(geometry, cat(rs, np.int64), cat(as_, np.int64), cat(jl, np.int64),
                        cat(ac, float), cat(asn, float), float(const))


def synthesize(spectrum: ModeSpectrum) -> np.ndarray:
    """Inverse of :func:`project_modes`."""
    g = spectrum.geometry
    p, n, M = g.p, g.levels, g.M
    out = np.full(g.N, spectrum.constant_component * float(p) ** (-M / 2.0))
    cos_t = _phase_table(p, "cos")
    sin_t = _phase_table(p, "sin")
    js = np.arange(1, p)
    phase_idx = (js[:, None] * np.arange(p)[None, :]) % p
    C, S = cos_t[phase_idx], sin_t[phase_idx]
    start = 0
    for s in range(n):
        r = M - s
        count = (p - 1) * p**s
        ac = spectrum.amp_cos[start:start + count].reshape(p**s, p - 1)
        asn = spectrum.amp_sin[start:start + count].reshape(p**s, p - 1)
        start += count
        vals = float(p) ** (-r / 2.0) * (C.T @ ac.T + S.T @ asn.T)  # (d, a)
        out += np.tile(vals.reshape(-1), p ** (n - s - 1))
    return out


def write_modes_csv(spectrum: ModeSpectrum, path) -> None:
    _io.write_csv(path, ["r", "n", "j", "amp_cos", "amp_sin", "power"], spectrum.csv_rows())


# ---------------------------------------------------------------------------
# Linear forecast and growth rates
# ---------------------------------------------------------------------------


def _mode_matrix(model: KineticsModel, jac, kappa: float) -> np.ndarray:
    return model.gamma * jac.matrix() - kappa * np.diag([1.0, model.d])


def linear_forecast(config: SimulationConfig, operator: VladimirovOperator | None, w0, t: float,
                    unstable_only: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Linearized evolution of a perturbation ``w0 = (w_u, w_v)`` to time ``t``.

    Each level of wavelets (one eigenvalue ``kappa``) evolves by the 2x2
    exponential of ``gamma J - kappa diag(1, d)``; the constant mode uses
    ``lambda_M``.  With ``unstable_only`` only the levels inside the unstable
    band are kept.  Valid while the perturbation stays small.
    """
    geometry, model = config.geometry, config.model
    op = operator or assemble(geometry, config.alpha, config.paper_literal)
    steady = find_steady_state(model, config.initial_guess)
    jac = jacobian_at(model, steady)
    wu, wv = (np.asarray(x, dtype=float) for x in w0)
    cu, parts_u = level_components(geometry, wu)
    cv, parts_v = level_components(geometry, wv)
    mu_const, mu = op.level_eigenvalues()
    band = kappa_band(jac, model.gamma, model.d)

    def keep(kappa):
        return not unstable_only or (band is not None and band[0] < kappa < band[1])

    out_u = np.zeros(geometry.N)
    out_v = np.zeros(geometry.N)
    pieces = [(mu_const, cu, cv)] + [(float(mu[s]), parts_u[s], parts_v[s])
                                     for s in range(geometry.levels)]
    for kappa, pu, pv in pieces:
        if not keep(kappa):
            continue
        E = scipy.linalg.expm(t * _mode_matrix(model, jac, kappa))
        out_u += E[0, 0] * pu + E[0, 1] * pv
        out_v += E[1, 0] * pu + E[1, 1] * pv
    return out_u, out_v


@dataclass
class GrowthFit:
    r: int
    kappa: float
    predicted: float
    measured: float
    times: np.ndarray
    amplitudes: np.ndarray

    @property
    def relative_error(self) -> float:
        return abs(self.measured - self.predicted) / abs(self.predicted)

    def to_dict(self) -> dict:
        return {"r": self.r, "kappa": self.kappa, "predicted_lambda_plus": self.predicted,
                "fitted_rate": self.measured, "relative_error": self.relative_error}


def unstable_direction(model: KineticsModel, jac, kappa: float) -> tuple[float, np.ndarray]:
    """Growth rate and left eigenvector of the fastest-growing 2x2 mode."""
    mat = _mode_matrix(model, jac, kappa)
    w, vl = scipy.linalg.eig(mat, left=True, right=False)
    k = int(np.argmax(w.real))
    return float(w[k].real), np.real(vl[:, k])


def dominant_scale(config: SimulationConfig) -> tuple[int, float]:
    """Grid scale with the largest ``Re lambda_+`` and its rate."""
    model = config.model
    jac = jacobian_at(model, find_steady_state(model, config.initial_guess))
    g = config.geometry
    best = max(range(g.M, -g.L, -1),
               key=lambda r: lambda_plus(jac, model.gamma, model.d,
                                         wavelet_eigenvalue(g.p, r, config.alpha)))
    kappa = wavelet_eigenvalue(g.p, best, config.alpha)
    return best, lambda_plus(jac, model.gamma, model.d, kappa)


def mode_amplitude(state: SimulationState, reference, geometry: GridGeometry, level: int,
                   left: np.ndarray) -> float:
    """Norm of the level-``s`` part of the perturbation along the unstable direction."""
    wu, wv = state.deviation(*reference)
    _, pu = level_components(geometry, wu)
    _, pv = level_components(geometry, wv)
    return float(np.linalg.norm(left[0] * pu[level] + left[1] * pv[level]))


def measure_growth_rate(config: SimulationConfig, operator: VladimirovOperator | None = None,
                        horizon: float = 0.5) -> GrowthFit:
    """Fit the exponential rate of the dominant unstable mode in a nonlinear run.

    The run covers ``[0, horizon / lambda_+]``; the amplitude is the dominant
    level's component along the left eigenvector for ``lambda_+``, which
    filters out the decaying partner mode.  Least-squares fit of its log.
    """
    r, lam = dominant_scale(config)
    if not lam > 0:
        raise SimulationError("no unstable scale: growth rate fit needs lambda_+ > 0")
    g = config.geometry
    kappa = wavelet_eigenvalue(g.p, r, config.alpha)
    jac = jacobian_at(config.model, find_steady_state(config.model, config.initial_guess))
    _, left = unstable_direction(config.model, jac, kappa)
    t_fit = horizon / lam
    n_steps = max(1, int(math.ceil(t_fit / config.dt - 1e-9)))
    cfg = config.with_(t_end=n_steps * config.dt, snapshot_stride=1)
    result = run(cfg, operator)
    level = g.M - r
    times = np.array([s.t for s in result.trajectory])
    amps = np.array([mode_amplitude(s, result.reference, g, level, left)
                     for s in result.trajectory])
    slope = np.polyfit(times, np.log(amps), 1)[0]
    return GrowthFit(r, kappa, lam, float(slope), times, amps)


# ---------------------------------------------------------------------------
# Pattern comparison and clusters
# ---------------------------------------------------------------------------


def pattern_distance(a, b) -> float:
    """Relative L2 distance of two deviation fields after optimal sign alignment."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    if scale == 0:
        return 0.0
    return float(min(np.linalg.norm(a - b), np.linalg.norm(a + b)) / scale)


def distinct_patterns(patterns, tol: float = 1e-2) -> list[int]:
    """Indices of representatives; a pattern is new if it is ``>= tol`` from all earlier ones."""
    reps: list[int] = []
    for i, pat in enumerate(patterns):
        if all(pattern_distance(pat, patterns[k]) >= tol for k in reps):
            reps.append(i)
    return reps


LABELS = {1: "rich", -1: "poor", 0: "neutral"}
_MIXED = 2


@dataclass(frozen=True)
class Cluster:
    level: int
    residue: int
    label: str
    members: tuple[int, ...]
    mean_u: float
    mean_v: float

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass
class ClusterReport:
    clusters: list[Cluster]
    threshold: float
    reference_u: float

    @property
    def counts(self) -> dict[str, int]:
        out = {"rich": 0, "poor": 0, "neutral": 0}
        for c in self.clusters:
            out[c.label] += 1
        return out

    @property
    def sizes(self) -> dict[int, int]:
        hist: dict[int, int] = {}
        for c in self.clusters:
            hist[c.size] = hist.get(c.size, 0) + 1
        return dict(sorted(hist.items()))

    def labels(self, N: int) -> np.ndarray:
        out = np.empty(N, dtype=object)
        for c in self.clusters:
            out[list(c.members)] = c.label
        return out

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "reference_u": self.reference_u,
            "count": len(self.clusters),
            "counts": self.counts,
            "sizes": {str(k): v for k, v in self.sizes.items()},
            "clusters": [
                {"level": c.level, "residue": c.residue, "label": c.label, "size": c.size,
                 "mean_u": c.mean_u, "mean_v": c.mean_v, "members": list(c.members)}
                for c in self.clusters
            ],
        }


def _uniform_levels(codes: np.ndarray, geometry: GridGeometry) -> list[np.ndarray]:
    p, n = geometry.p, geometry.levels
    levels = [None] * (n + 1)
    levels[n] = codes
    for s in range(n - 1, -1, -1):
        child = levels[s + 1].reshape(p, p**s)
        same = (child == child[0]).all(axis=0)
        levels[s] = np.where(same, child[0], _MIXED)
    return levels


def cluster_analysis(u, geometry: GridGeometry, u0: float, v=None, threshold: float | None = None,
                     ) -> ClusterReport:
    """Group grid points into maximal tree nodes with a common rich/poor/neutral label.

    A point is rich if ``u - u0 > threshold``, poor if ``< -threshold``.  The
    default threshold is ``0.1 * std(u - u0)``.
    """
    u = np.asarray(u, dtype=float)
    v = np.zeros_like(u) if v is None else np.asarray(v, dtype=float)
    dev = u - u0
    if threshold is None:
        threshold = 0.1 * float(np.std(dev))
    codes = np.where(dev > threshold, 1, np.where(dev < -threshold, -1, 0))
    levels = _uniform_levels(codes, geometry)
    p, n = geometry.p, geometry.levels
    covered = np.zeros(geometry.N, dtype=bool)
    clusters = []
    for s in range(n + 1):
        ps = p**s
        for c in np.flatnonzero(levels[s] != _MIXED):
            members = np.arange(c, geometry.N, ps)
            if covered[members[0]]:
                continue
            covered[members] = True
            clusters.append(Cluster(s, int(c), LABELS[int(levels[s][c])],
                                    tuple(int(m) for m in members),
                                    float(u[members].mean()), float(v[members].mean())))
    return ClusterReport(clusters, float(threshold), float(u0))


def cluster_dot(report: ClusterReport, geometry: GridGeometry) -> str:
    """Grid tree in DOT, with nodes inside a cluster colored by its label."""
    colors = {"rich": "firebrick", "poor": "steelblue", "neutral": "gray80"}
    p, n = geometry.p, geometry.levels
    owner = {}
    for c in report.clusters:
        owner[(c.level, c.residue)] = c.label
    lines = ["graph tree {", "  node [style=filled, shape=circle, label=\"\"];"]
    label_at = {}
    for s in range(n + 1):
        for c in range(p**s):
            parent = (s - 1, c % p ** (s - 1)) if s > 0 else None
            lab = owner.get((s, c)) or (label_at.get(parent) if parent else None)
            label_at[(s, c)] = lab
            color = colors.get(lab, "white")
            lines.append(f"  n{s}_{c} [fillcolor={color}];")
            if parent is not None:
                lines.append(f"  n{parent[0]}_{parent[1]} -- n{s}_{c};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def snapshot_rows(trajectory, geometry: GridGeometry):
    digits = [geometry.point(i).digit_string() for i in range(geometry.N)]
    for state in trajectory:
        for i in range(geometry.N):
            yield state.step, float(state.t), i, digits[i], float(state.u[i]), float(state.v[i])


def write_snapshots_csv(trajectory, geometry: GridGeometry, path) -> None:
    _io.write_csv(path, ["step", "t", "index", "digits", "u", "v"],
                  snapshot_rows(trajectory, geometry))


def write_clusters_json(report: ClusterReport, path) -> None:
    _io.write_json(path, report.to_dict())


def write_cluster_dot(report: ClusterReport, geometry: GridGeometry, path) -> None:
    _io.write_text(path, cluster_dot(report, geometry))
