"""Discretized Vladimirov operator on G_{L,M}.

The grid matrix has entries that depend only on the ultrametric distance of
the two cells, so it is block-hierarchical: every vector in the span of the
wavelets branching at tree level ``s`` is an eigenvector with a common
eigenvalue.  This gives three ways to apply it.

* dense: the explicit ``N x N`` matrix (capped, default ``N <= 4096``);
* fast: ``O(N (L+M))`` matvec using per-node partial sums;
* spectral: exact functional calculus ``phi(A) x`` from per-level class means,
  used for implicit solves and exponentials.
"""

from __future__ import annotations

import math
import struct
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import _io
from .errors import DenseCapExceeded, OperatorError, SpectrumMismatchError
from .padic import (
    GridGeometry,
    RationalLike,
    WaveletIndex,
    _tile,
    admissible_wavelets,
    padic_order,
    wavelet_samples,
)

DEFAULT_DENSE_CAP = 4096
MATRIX_MAGIC = b"PADOP\0"
MATRIX_VERSION = 1


def _check_alpha(alpha) -> float:
    try:
        alpha = float(alpha)
    except (TypeError, ValueError):
        raise OperatorError(f"alpha must be a real number, got {alpha!r}") from None
    if not math.isfinite(alpha) or alpha <= 0:
        raise OperatorError(f"alpha must be > 0, got {alpha}")
    return alpha


@dataclass(frozen=True)
class OperatorConstants:
    p: int
    alpha: float
    M: int
    C_alpha: float
    lambda_M: float

    @classmethod
    def create(cls, p: int, alpha: float, M: int) -> "OperatorConstants":
        alpha = _check_alpha(alpha)
        denom = 1.0 - p ** (-alpha - 1.0)
        C = (1.0 - p**alpha) / denom
        lam = (1.0 - 1.0 / p) * p ** (-alpha * M) / denom
        return cls(p=p, alpha=alpha, M=M, C_alpha=C, lambda_M=lam)


def wavelet_eigenvalue(p: int, r: int, alpha: float) -> float:
    """``p^{(1-r) alpha}``, the eigenvalue of every wavelet at scale ``r``."""
    return float(p) ** ((1 - r) * alpha)


def scale_eigenvalues(geometry: GridGeometry, alpha) -> list[tuple[int, float, int]]:
    """``(r, kappa_r, multiplicity)`` for every wavelet scale, coarsest first."""
    alpha = _check_alpha(alpha)
    p = geometry.p
    return [(r, wavelet_eigenvalue(p, r, alpha), (p - 1) * p ** (geometry.M - r))
            for r in range(geometry.M, -geometry.L, -1)]


class VladimirovOperator:
    """Grid operator ``A^alpha_{L,M}``; immutable once constructed.

    Attributes:
        geometry: the grid.
        constants: ``C_alpha`` and ``lambda_M``.
        shell_coefficients: ``c[v]`` is the off-diagonal entry between cells
            whose labels differ by a number of exact p-order ``v``, i.e. at
            distance ``p^{M-v}``, for ``v = 0..L+M-1``.
        diagonal: common diagonal entry.
        paper_literal: whether the alternative ``p^{-L/2}``, ``-lambda_M``
            normalization was used.
    """

    def __init__(self, geometry: GridGeometry, constants: OperatorConstants,
                 paper_literal: bool = False, dense_cap: int = DEFAULT_DENSE_CAP):
        self.geometry = geometry
        self.constants = constants
        self.paper_literal = bool(paper_literal)
        self.dense_cap = int(dense_cap)
        p, n, M, L = geometry.p, geometry.levels, geometry.M, geometry.L
        alpha = constants.alpha
        scale = float(p) ** (-L / 2.0) if paper_literal else float(p) ** (-L)
        self.shell_coefficients = np.array(
            [scale * constants.C_alpha * float(p) ** (-(M - v) * (alpha + 1.0)) for v in range(n)]
        )
        # ascending distance: v = n-1 (nearest shell) first
        self.off_diagonal_row_sum = math.fsum(
            (p - 1) * p ** (n - v - 1) * self.shell_coefficients[v] for v in range(n - 1, -1, -1)
        )
        shift = -constants.lambda_M if paper_literal else constants.lambda_M
        self.diagonal = -self.off_diagonal_row_sum + shift
        self._level_eigs = self._compute_level_eigenvalues()
        self._dense = None
        self._lock = threading.Lock()

    @property
    def N(self) -> int:
        return self.geometry.N

    @property
    def alpha(self) -> float:
        return self.constants.alpha

    def __repr__(self):
        g = self.geometry
        return (f"VladimirovOperator(p={g.p}, M={g.M}, L={g.L}, alpha={self.alpha}, "
                f"paper_literal={self.paper_literal})")

    # -- spectrum of the hierarchical form ---------------------------------

    def _compute_level_eigenvalues(self) -> tuple[float, np.ndarray]:
        # Vectors constant on classes mod p^{s+1} with zero mean on classes
        # mod p^s see: diag + sum_{v>s} c_v (p^{n-v} - p^{n-v-1}) - c_s p^{n-s-1}.
        p, n = self.geometry.p, self.geometry.levels
        c = self.shell_coefficients
        levels = np.empty(n)
        for s in range(n):
            terms = [c[v] * (p ** (n - v) - p ** (n - v - 1)) for v in range(n - 1, s, -1)]
            terms.append(-c[s] * p ** (n - s - 1))
            levels[s] = self.diagonal + math.fsum(terms)
        const = self.diagonal + self.off_diagonal_row_sum
        return const, levels

    def level_eigenvalues(self) -> tuple[float, np.ndarray]:
        """``(mu_const, mu[s])``: eigenvalue of the constant and of level-``s`` wavelets.

        Computed from the assembled shell coefficients, so this reflects the
        matrix actually built (including the literal variant).
        """
        const, levels = self._level_eigs
        return const, levels.copy()

    # -- dense form ---------------------------------------------------------

    @property
    def dense(self) -> np.ndarray:
        """The explicit matrix (read-only view, built once)."""
        if self.N > self.dense_cap:
            raise DenseCapExceeded(self.N, self.dense_cap)
        with self._lock:
            if self._dense is None:
                table = np.append(self.shell_coefficients, self.diagonal)
                mat = table[self.geometry.distance_orders()]
                mat.setflags(write=False)
                self._dense = mat
        return self._dense


def assemble(geometry: GridGeometry, alpha, paper_literal: bool = False,
             dense_cap: int = DEFAULT_DENSE_CAP) -> VladimirovOperator:
    """Build the grid operator.

    Off-diagonal entries are ``p^{-L} C_alpha |K - I|_p^{-(alpha+1)}`` and the
    diagonal is minus the off-diagonal row sum plus ``lambda_M``, so constants
    are eigenvectors with eigenvalue ``lambda_M``.  ``paper_literal`` switches
    to the ``p^{-L/2}`` factor and ``-lambda_M`` shift for comparison.

    The dense matrix is materialized lazily via :attr:`VladimirovOperator.dense`
    and is refused beyond ``dense_cap``.
    """
    constants = OperatorConstants.create(geometry.p, alpha, geometry.M)
    if dense_cap < 1:
        raise OperatorError(f"dense_cap must be positive, got {dense_cap}")
    return VladimirovOperator(geometry, constants, paper_literal, dense_cap)


def _check_vector(op: VladimirovOperator, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim not in (1, 2) or v.shape[0] != op.N:
        raise OperatorError(f"expected a vector of length {op.N} (or an ({op.N}, k) block), "
                            f"got shape {v.shape}")
    return v


def apply_dense(op: VladimirovOperator, v) -> np.ndarray:
    v = _check_vector(op, v)
    return op.dense @ v


def apply_fast(op: VladimirovOperator, v) -> np.ndarray:
    """Matrix-vector product in ``O(N (L+M))``.

    With ``S_v(K)`` the sum of ``x`` over the residue class of ``K`` modulo
    ``p^v``, the off-diagonal part is
    ``c_0 S_0 + sum_{v>=1} (c_v - c_{v-1}) S_v - c_{n-1} x``.
    Class sums are formed bottom-up and the shell terms accumulated top-down,
    always in the same order.
    """
    x = _check_vector(op, v)
    p, n = op.geometry.p, op.geometry.levels
    c = op.shell_coefficients
    if n == 0:
        return op.diagonal * x
    sums = [None] * (n + 1)
    sums[n] = x
    for s in range(n - 1, 0, -1):
        child = sums[s + 1]
        sums[s] = child.reshape((p, p**s) + child.shape[1:]).sum(axis=0)
    acc = c[0] * x.reshape((p**n, 1) + x.shape[1:]).sum(axis=0)
    for s in range(1, n):
        acc = _tile(acc, p) + (c[s] - c[s - 1]) * sums[s]
    return _tile(acc, p) + (op.diagonal - c[n - 1]) * x


def _class_means(x: np.ndarray, p: int, n: int) -> list[np.ndarray]:
    means = [None] * (n + 1)
    means[n] = x
    for s in range(n - 1, -1, -1):
        child = means[s + 1]
        means[s] = child.reshape((p, p**s) + child.shape[1:]).sum(axis=0) / p
    return means


def level_components(op_or_geometry, x) -> tuple[np.ndarray, list[np.ndarray]]:
    """Split ``x`` into its constant part and per-level wavelet parts.

    Returns ``(P_const x, [P_0 x, ..., P_{n-1} x])`` where ``P_s`` projects on
    the span of wavelets branching at level ``s`` (scale ``r = M - s``).  All
    parts are full-length vectors that add up to ``x``.
    """
    geometry = getattr(op_or_geometry, "geometry", op_or_geometry)
    p, n = geometry.p, geometry.levels
    x = np.asarray(x, dtype=float)
    means = _class_means(x, p, n)
    const = _tile(means[0], p**n)
    parts = []
    for s in range(n):
        parts.append(_tile(means[s + 1], p ** (n - s - 1)) - _tile(means[s], p ** (n - s)))
    return const, parts


class LevelMultiplier:
    """Precomputed ``phi(A)`` acting through the hierarchical eigendecomposition.

    ``const`` and each entry of ``levels`` may be scalars or length-``k``
    arrays, in which case column ``i`` of an ``(N, k)`` input gets factor ``i``.
    """

    def __init__(self, op: VladimirovOperator, const, levels):
        self.op = op
        self.const = np.asarray(const, dtype=float)
        self.levels = [np.asarray(x, dtype=float) for x in levels]

    @classmethod
    def from_function(cls, op: VladimirovOperator, phi: Callable) -> "LevelMultiplier":
        mu_const, mu = op._level_eigs
        return cls(op, phi(mu_const), [phi(float(m)) for m in mu])

    def __call__(self, v) -> np.ndarray:
        x = _check_vector(self.op, v)
        p, n = self.op.geometry.p, self.op.geometry.levels
        means = _class_means(x, p, n)
        acc = self.const * means[0]
        for s in range(n):
            acc = _tile(acc, p) + self.levels[s] * (means[s + 1] - _tile(means[s], p))
        return acc


def apply_function(op: VladimirovOperator, phi: Callable, v) -> np.ndarray:
    """Exact ``phi(A) v`` through the hierarchical eigendecomposition.

    ``phi`` is called once per distinct eigenvalue with a Python float.
    """
    return LevelMultiplier.from_function(op, phi)(v)


def expm_apply(op: VladimirovOperator, t: float, v) -> np.ndarray:
    """``exp(-t A) v`` via :func:`apply_function`."""
    return apply_function(op, lambda lam: math.exp(-t * lam), v)


def resolvent_apply(op: VladimirovOperator, shift: float, v) -> np.ndarray:
    """``(I + shift A)^{-1} v``."""
    return apply_function(op, lambda lam: 1.0 / (1.0 + shift * lam), v)


def eigendecomposition(op: VladimirovOperator) -> tuple[np.ndarray, np.ndarray]:
    """Dense symmetric eigendecomposition ``(w, V)`` of the assembled matrix."""
    return np.linalg.eigh(op.dense)


def expm_dense(op: VladimirovOperator, t: float) -> np.ndarray:
    """``exp(-t A)`` as a dense matrix from the symmetric eigendecomposition."""
    w, V = eigendecomposition(op)
    return (V * np.exp(-t * w)) @ V.T


# ---------------------------------------------------------------------------
# Spectrum
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectrumEntry:
    value: float
    multiplicity: int
    label: str


@dataclass
class SpectrumReport:
    entries: list[SpectrumEntry]
    max_residual: float = 0.0
    max_relative_deviation: float = 0.0
    matched: bool = True
    numerical: list[float] | None = None
    offending: list[tuple[int, float, float]] = field(default_factory=list)
    residuals: list[tuple[WaveletIndex, str, float]] = field(default_factory=list)

    @property
    def total_multiplicity(self) -> int:
        return sum(e.multiplicity for e in self.entries)

    def expanded(self) -> np.ndarray:
        """Sorted eigenvalues repeated by multiplicity."""
        vals = np.concatenate([np.full(e.multiplicity, e.value) for e in self.entries])
        return np.sort(vals, kind="stable")

    def to_dict(self) -> dict:
        return {
            "entries": [
                {"value": e.value, "multiplicity": e.multiplicity, "label": e.label}
                for e in self.entries
            ],
            "matched": self.matched,
            "max_relative_deviation": self.max_relative_deviation,
            "max_residual": self.max_residual,
            "numerical": self.numerical,
            "offending": [
                {"position": i, "numerical": num, "analytic": ana} for i, num, ana in self.offending
            ],
            "residuals": [
                {"r": w.r, "n": f"{w.n.numerator}/{w.n.denominator}", "j": w.j, "form": form,
                 "residual": res} for w, form, res in self.residuals
            ],
        }


def analytic_spectrum(geometry: GridGeometry, alpha) -> SpectrumReport:
    """Closed-form spectrum: ``lambda_M`` once, ``p^{(1-r)alpha}`` with multiplicity ``(p-1)p^{M-r}``."""
    const = OperatorConstants.create(geometry.p, alpha, geometry.M)
    p = geometry.p
    entries = [SpectrumEntry(const.lambda_M, 1, "constant")]
    for r in range(geometry.M, -geometry.L, -1):
        entries.append(SpectrumEntry(wavelet_eigenvalue(p, r, const.alpha),
                                     (p - 1) * p ** (geometry.M - r), f"wavelet(r={r})"))
    entries.sort(key=lambda e: e.value)
    return SpectrumReport(entries=entries)


def _grouped_residuals(op: VladimirovOperator, wavelets, cols: np.ndarray,
                       kappas: np.ndarray) -> np.ndarray:
    """Residual norms from the dense matrix in extended precision.

    At fine scales the diagonal is many orders larger than the eigenvalue of
    coarse wavelets, so a float64 row product loses about ``eps * |A_II|`` to
    cancellation.  Products are taken only over each wavelet's support.
    """
    geometry = op.geometry
    A = op.dense.astype(np.longdouble)
    groups: dict[tuple[int, int], list[int]] = {}
    for k, w in enumerate(wavelets):
        groups.setdefault((w.level(geometry), w.offset(geometry)), []).append(k)
    out = np.empty(len(wavelets))
    for (s, a), ks in groups.items():
        sup = np.arange(a, geometry.N, geometry.p**s)
        psi = cols[np.ix_(sup, ks)].astype(np.longdouble)
        res = A[:, sup] @ psi
        res[sup] -= psi * kappas[ks].astype(np.longdouble)
        out[ks] = np.sqrt((res * res).sum(axis=0)).astype(float)
    return out / np.linalg.norm(cols, axis=0)


def wavelet_residuals(op: VladimirovOperator, apply=None) -> list[tuple[WaveletIndex, str, float]]:
    """``||A Psi - kappa Psi|| / ||Psi||`` for every real wavelet form on the grid.

    With ``apply=None`` the dense matrix is used in extended precision; pass
    e.g. :func:`apply_fast` to measure that code path in float64 instead.
    For ``p = 2`` the sin-forms vanish identically and are skipped.
    """
    geometry = op.geometry
    wavelets = admissible_wavelets(geometry)
    if not wavelets:
        return []
    forms = ("cos",) if geometry.p == 2 else ("cos", "sin")
    out = []
    for form in forms:
        cols = np.stack([wavelet_samples(w, geometry, form) for w in wavelets], axis=1)
        kappas = np.array([wavelet_eigenvalue(geometry.p, w.r, op.alpha) for w in wavelets])
        if apply is None:
            rn = _grouped_residuals(op, wavelets, cols, kappas)
        else:
            resid = apply(op, cols) - cols * kappas[None, :]
            rn = np.linalg.norm(resid, axis=0) / np.linalg.norm(cols, axis=0)
        out.extend((w, form, float(x)) for w, x in zip(wavelets, rn))
    return out


def verify_spectrum(op: VladimirovOperator, rtol: float = 1e-8, residuals: bool = True,
                    raise_on_mismatch: bool = True) -> SpectrumReport:
    """Diagonalize the dense matrix and compare with :func:`analytic_spectrum`.

    Raises:
        DenseCapExceeded: if ``N`` exceeds the operator's dense cap.
        SpectrumMismatchError: if any sorted eigenvalue deviates by more than
            ``rtol`` (relative) and ``raise_on_mismatch`` is set.  The report is
            attached to the exception.
    """
    mat = op.dense
    report = analytic_spectrum(op.geometry, op.alpha)
    expected = report.expanded()
    numerical = np.linalg.eigvalsh(mat)
    dev = np.abs(numerical - expected) / np.abs(expected)
    report.numerical = [float(x) for x in numerical]
    report.max_relative_deviation = float(dev.max())
    report.offending = [(int(i), float(numerical[i]), float(expected[i]))
                        for i in np.flatnonzero(dev > rtol)]
    report.matched = not report.offending
    if residuals:
        report.residuals = wavelet_residuals(op)
        report.max_residual = max((r for _, _, r in report.residuals), default=0.0)
        # constant mode: row sums, again in extended precision
        rows = mat.astype(np.longdouble).sum(axis=1) - np.longdouble(op.constants.lambda_M)
        report.max_residual = max(report.max_residual,
                                  float(np.sqrt((rows * rows).sum() / op.N)))
    if not report.matched and raise_on_mismatch:
        raise SpectrumMismatchError(
            f"{len(report.offending)} of {op.N} eigenvalues deviate from the analytic "
            f"spectrum (max relative deviation {report.max_relative_deviation:.3e})",
            report.offending, report)
    return report


# ---------------------------------------------------------------------------
# Heat kernel
# ---------------------------------------------------------------------------


def _shell_series(t: float, alpha: float, p: int, k_top: int) -> list[float]:
    """Terms ``(1 - 1/p) p^k exp(-t p^{k alpha})`` for ``k = k_top, k_top - 1, ...``.

    Stops once the exponential is past its bulk (``t p^{k alpha} < 1``) and
    the geometric tail drops below ``1e-16`` of the partial sum.
    """
    terms, total, k = [], 0.0, k_top
    while True:
        tk = t * float(p) ** (k * alpha)
        term = (1.0 - 1.0 / p) * float(p) ** k * math.exp(-tk)
        terms.append(term)
        total += term
        if tk < 1.0 and term <= 1e-16 * total:
            return terms
        k -= 1


def _upper_series(t: float, alpha: float, p: int, k_bottom: int) -> list[float]:
    terms, total, k = [], 0.0, k_bottom
    while True:
        tk = t * float(p) ** (k * alpha)
        term = (1.0 - 1.0 / p) * float(p) ** k * math.exp(-tk) if tk < 745.0 else 0.0
        terms.append(term)
        total += term
        if tk > 1.0 and term <= 1e-16 * total:
            return terms
        k += 1


def heat_kernel(x: RationalLike, t: float, alpha, p: int) -> float:
    """p-adic heat kernel ``Z(x, t)`` by its radial shell decomposition.

    For ``|x|_p = p^beta``
    ``Z = sum_{k <= -beta} (1 - 1/p) p^k e^{-t p^{k alpha}} - p^{-beta} e^{-t p^{(1-beta) alpha}}``,
    and ``Z(0, t)`` is the full two-sided shell series.
    """
    alpha = _check_alpha(alpha)
    t = float(t)
    if not t > 0:
        raise OperatorError(f"t must be > 0, got {t}")
    v = padic_order(x, p)
    if v == math.inf:
        return math.fsum(_upper_series(t, alpha, p, 0) + _shell_series(t, alpha, p, -1))
    beta = -v
    shell = math.fsum(_shell_series(t, alpha, p, -beta))
    edge = float(p) ** (-beta) * math.exp(-t * float(p) ** ((1 - beta) * alpha))
    return shell - edge


def heat_kernel_cell_average(t: float, alpha, p: int, L: int) -> float:
    """Mean of ``Z(., t)`` over the ball ``|x|_p <= p^{-L}``."""
    alpha = _check_alpha(alpha)
    if not t > 0:
        raise OperatorError(f"t must be > 0, got {t}")
    return math.fsum(_shell_series(float(t), alpha, p, L))


def heat_kernel_grid(geometry: GridGeometry, t: float, alpha) -> np.ndarray:
    """Cell averages of ``Z(., t)`` on the grid cells.

    ``Z`` depends on ``|x|_p`` only, so it is constant on every cell except
    the one containing 0, where the cell average is used.  Multiplying by
    ``p^{-L}`` gives the free heat flow of the indicator of cell 0.
    """
    p, n, M = geometry.p, geometry.levels, geometry.M
    out = np.empty(geometry.N)
    out[0] = heat_kernel_cell_average(t, alpha, p, geometry.L)
    if n == 0:
        return out
    idx = np.arange(1, geometry.N)
    orders = np.zeros(idx.shape, dtype=np.int64)
    rem = idx.copy()
    while True:
        hit = rem % p == 0
        if not hit.any():
            break
        orders += hit
        rem = np.where(hit, rem // p, rem)
    cache = {v: heat_kernel(Fraction(p) ** (v - M), t, alpha, p) for v in range(n)}
    out[1:] = [cache[int(v)] for v in orders]
    return out


def dalpha_on_indicator(x: RationalLike, M: int, alpha, p: int) -> float:
    """``D^alpha`` applied to the indicator of ``B_M``, evaluated at ``x``."""
    const = OperatorConstants.create(p, alpha, M)
    v = padic_order(x, p)
    if v == math.inf or -v <= M:
        return const.lambda_M
    norm = float(p) ** (-v)
    return (1.0 - p**const.alpha) * float(p) ** M / (
        (1.0 - p ** (-const.alpha - 1.0)) * norm ** (const.alpha + 1.0))


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def write_matrix_csv(op: VladimirovOperator, path) -> None:
    mat = op.dense
    n = op.N
    rows = ((i, j, float(mat[i, j])) for i in range(n) for j in range(n))
    _io.write_csv(path, ["row", "col", "value"], rows)


def matrix_to_bytes(op: VladimirovOperator) -> bytes:
    header = MATRIX_MAGIC + struct.pack("<H", MATRIX_VERSION)
    return header + np.ascontiguousarray(op.dense, dtype="<f8").tobytes()


def write_matrix_binary(op: VladimirovOperator, path) -> None:
    _io.write_bytes(path, matrix_to_bytes(op))


def read_matrix_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:6] != MATRIX_MAGIC:
        raise OperatorError("not a matrix file (bad magic)")
    (version,) = struct.unpack("<H", data[6:8])
    if version != MATRIX_VERSION:
        raise OperatorError(f"unsupported matrix file version {version}")
    flat = np.frombuffer(data[8:], dtype="<f8")
    n = math.isqrt(flat.size)
    if n * n != flat.size:
        raise OperatorError("matrix payload is not square")
    return flat.reshape(n, n).astype(float)


def write_spectrum_json(report: SpectrumReport, path) -> None:
    _io.write_json(path, report.to_dict())


def write_residuals_csv(report: SpectrumReport, path) -> None:
    rows = ((w.r, f"{w.n.numerator}/{w.n.denominator}", w.j, form, res)
            for w, form, res in report.residuals)
    _io.write_csv(path, ["r", "n", "j", "form", "residual"], rows)
