"""Exact p-adic arithmetic on rationals, the finite grid G_{L,M} and Kozyrev wavelets.

All p-adic logic runs on :class:`fractions.Fraction`; floating point enters
only when a phase ``q`` in ``[0, 1)`` is turned into ``cos(2 pi q)`` and
``sin(2 pi q)``.

Grid points of ``G_{L,M} = p^{-M} Z_p / p^L Z_p`` are stored by their integer
label ``I~ = sum_k d_k p^k`` in ``[0, p^{L+M})`` with the digit vector kept
least-significant first, so the point itself is ``p^{-M} I~``.  The rooted
tree of the grid branches on the least-significant digit first: the nodes at
level ``s`` are the residue classes of ``I~`` modulo ``p^s``, which are
exactly the balls of radius ``p^{M-s}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Union

import numpy as np

from .errors import GeometryError

RationalLike = Union[int, Fraction, str]

INFINITY = math.inf


def is_prime(p: int) -> bool:
    if not isinstance(p, (int, np.integer)) or isinstance(p, bool) or p < 2:
        return False
    if p < 4:
        return True
    if p % 2 == 0:
        return False
    f = 3
    while f * f <= p:
        if p % f == 0:
            return False
        f += 2
    return True


def _check_prime(p) -> int:
    if not is_prime(p):
        raise GeometryError(f"p must be a prime, got {p!r}")
    return int(p)


@dataclass(frozen=True)
class PadicConfig:
    p: int

    def __post_init__(self):
        _check_prime(self.p)


def as_rational(x: RationalLike) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"expected an exact rational, got {type(x).__name__}")


def _int_order(m: int, p: int) -> int:
    v = 0
    while m % p == 0:
        m //= p
        v += 1
    return v


def padic_order(x: RationalLike, p: int) -> int | float:
    """Return ``ord_p(x)``; ``math.inf`` for ``x = 0``."""
    x = as_rational(x)
    if x == 0:
        return INFINITY
    return _int_order(x.numerator, p) - _int_order(x.denominator, p)


def padic_norm(x: RationalLike, p: int) -> Fraction:
    """Return ``|x|_p = p^{-ord(x)}`` exactly (``0`` for ``x = 0``)."""
    v = padic_order(x, p)
    if v == INFINITY:
        return Fraction(0)
    return Fraction(p) ** (-v)


def fractional_part(x: RationalLike, p: int) -> Fraction:
    """Return the p-adic fractional part ``{x}_p`` in ``[0, 1)``.

    For ``ord(x) = -k < 0`` write ``x = a / (p^k u)`` with ``p`` coprime to
    ``a`` and ``u``; the tail of the digit expansion below ``p^0`` is
    ``(a u^{-1} mod p^k) / p^k``.
    """
    x = as_rational(x)
    v = padic_order(x, p)
    if v == INFINITY or v >= 0:
        return Fraction(0)
    k = -v
    pk = p**k
    unit = x.denominator // pk
    residue = (x.numerator * pow(unit, -1, pk)) % pk
    return Fraction(residue, pk)


_QUARTER_TURNS = {
    Fraction(0): (1.0, 0.0),
    Fraction(1, 4): (0.0, 1.0),
    Fraction(1, 2): (-1.0, 0.0),
    Fraction(3, 4): (0.0, -1.0),
}


def unit_phase(q: Fraction) -> tuple[float, float]:
    """``(cos 2 pi q, sin 2 pi q)`` with exact values at quarter turns."""
    q = q - math.floor(q)
    exact = _QUARTER_TURNS.get(q)
    if exact is not None:
        return exact
    angle = 2.0 * math.pi * float(q)
    return math.cos(angle), math.sin(angle)


def additive_character(x: RationalLike, p: int) -> complex:
    """``chi_p(x) = exp(2 pi i {x}_p)``."""
    c, s = unit_phase(fractional_part(x, p))
    return complex(c, s)


# ---------------------------------------------------------------------------
# The finite grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridGeometry:
    """The finite ring ``G_{L,M}`` modelling the ball ``B_M`` at resolution ``p^{-L}``."""

    p: int
    M: int
    L: int

    def __post_init__(self):
        _check_prime(self.p)
        for name in ("M", "L"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, (int, np.integer)):
                raise GeometryError(f"{name} must be an integer, got {val!r}")
        if self.L < -self.M:
            raise GeometryError(f"need L >= -M, got L={self.L}, M={self.M}")

    @property
    def levels(self) -> int:
        """Depth of the grid tree, ``L + M``."""
        return self.L + self.M

    @property
    def N(self) -> int:
        return self.p**self.levels

    @property
    def cell_measure(self) -> float:
        """Haar measure ``p^{-L}`` of one grid cell."""
        return float(self.p) ** (-self.L)

    def point(self, index: int) -> "GridPoint":
        return GridPoint(self, int(index))

    def points(self) -> Iterator["GridPoint"]:
        for i in range(self.N):
            yield GridPoint(self, i)

    def digits(self) -> np.ndarray:
        """``(N, L+M)`` digit table, least-significant digit first."""
        idx = np.arange(self.N, dtype=np.int64)
        powers = self.p ** np.arange(self.levels, dtype=np.int64)
        return (idx[:, None] // powers[None, :]) % self.p

    def distance_orders(self) -> np.ndarray:
        """``(N, N)`` table of ``v = ord_p(I~_a - I~_b)`` (``levels`` on the diagonal)."""
        idx = np.arange(self.N, dtype=np.int64)
        orders = np.zeros((self.N, self.N), dtype=np.int16)
        for s in range(1, self.levels + 1):
            ps = self.p**s
            res = idx % ps
            orders += res[:, None] == res[None, :]
        return orders

    def inner(self, f, g) -> complex | float:
        """Discrete ``L^2(B_M)`` inner product ``p^{-L} sum f conj(g)``."""
        f = np.asarray(f)
        g = np.asarray(g)
        return self.cell_measure * np.sum(f * np.conj(g))

    def norm(self, f) -> float:
        return float(np.sqrt(abs(self.inner(f, f))))

    def constant_mode(self) -> np.ndarray:
        """Unit-norm constant function ``p^{-M/2}`` on the ball."""
        return np.full(self.N, float(self.p) ** (-self.M / 2.0))


@dataclass(frozen=True)
class GridPoint:
    geometry: GridGeometry
    index: int

    def __post_init__(self):
        if not 0 <= self.index < self.geometry.N:
            raise GeometryError(f"index {self.index} outside [0, {self.geometry.N})")

    @classmethod
    def from_digits(cls, geometry: GridGeometry, digits) -> "GridPoint":
        digits = list(digits)
        if len(digits) != geometry.levels or any(not 0 <= d < geometry.p for d in digits):
            raise GeometryError(f"invalid digit vector {digits!r}")
        return cls(geometry, sum(int(d) * geometry.p**k for k, d in enumerate(digits)))

    @classmethod
    def from_value(cls, geometry: GridGeometry, value: RationalLike) -> "GridPoint":
        """Reduce a rational in ``p^{-M} Z_p`` to its canonical representative."""
        value = as_rational(value)
        scaled = value * Fraction(geometry.p) ** geometry.M
        if padic_order(scaled, geometry.p) < 0:
            raise GeometryError(f"{value} is not in the ball of radius p^{geometry.M}")
        N = geometry.N
        # scaled is a p-adic integer; its residue mod N is a * u^{-1}
        index = (scaled.numerator * pow(scaled.denominator, -1, N)) % N if N > 1 else 0
        return cls(geometry, index)

    @property
    def digits(self) -> tuple[int, ...]:
        p, i = self.geometry.p, self.index
        out = []
        for _ in range(self.geometry.levels):
            i, d = divmod(i, p)
            out.append(d)
        return tuple(out)

    @property
    def value(self) -> Fraction:
        return Fraction(self.index) * Fraction(self.geometry.p) ** (-self.geometry.M)

    def digit_string(self) -> str:
        sep = "" if self.geometry.p <= 10 else "."
        return sep.join(str(d) for d in self.digits)

    def _same_grid(self, other: "GridPoint"):
        if not isinstance(other, GridPoint) or other.geometry != self.geometry:
            raise GeometryError("grid points belong to different geometries")

    def __add__(self, other: "GridPoint") -> "GridPoint":
        self._same_grid(other)
        return GridPoint(self.geometry, (self.index + other.index) % self.geometry.N)

    def __sub__(self, other: "GridPoint") -> "GridPoint":
        self._same_grid(other)
        return GridPoint(self.geometry, (self.index - other.index) % self.geometry.N)

    def __neg__(self) -> "GridPoint":
        return GridPoint(self.geometry, (-self.index) % self.geometry.N)


def grid_enumerate(geometry: GridGeometry) -> list[GridPoint]:
    return list(geometry.points())


def grid_distance_norm(a: GridPoint, b: GridPoint, geometry: GridGeometry | None = None) -> Fraction:
    """``|a - b|_p`` from the integer difference of the labels (not reduced mod N)."""
    geometry = geometry or a.geometry
    if a.geometry != geometry or b.geometry != geometry:
        raise GeometryError("grid points belong to a different geometry")
    diff = a.index - b.index
    if diff == 0:
        return Fraction(0)
    v = _int_order(abs(diff), geometry.p)
    return Fraction(geometry.p) ** (geometry.M - v)


def grid_csv_rows(geometry: GridGeometry):
    """Rows ``(index, digits, "a/b")`` for CSV export."""
    for pt in geometry.points():
        val = pt.value
        yield pt.index, pt.digit_string(), f"{val.numerator}/{val.denominator}"


# ---------------------------------------------------------------------------
# Wavelets
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class WaveletIndex:
    """Index ``(r, n, j)`` of the wavelet ``Psi_{rnj}``.

    ``n`` is the canonical representative ``a / p^k`` (``0 <= a < p^k``) of an
    element of ``Q_p / Z_p``.
    """

    r: int
    n: Fraction
    j: int

    def __post_init__(self):
        object.__setattr__(self, "n", as_rational(self.n))
        if not 0 <= self.n < 1:
            raise GeometryError(f"n must lie in [0, 1), got {self.n}")

    def level(self, geometry: GridGeometry) -> int:
        """Tree level ``s = M - r`` at which the wavelet branches."""
        return geometry.M - self.r

    def offset(self, geometry: GridGeometry) -> int:
        """Residue ``a = n p^s`` of the support class modulo ``p^s``."""
        a = self.n * geometry.p ** self.level(geometry)
        if a.denominator != 1:
            raise GeometryError(f"{self} is not supported in the grid ball")
        return int(a)

    def is_admissible(self, geometry: GridGeometry) -> bool:
        p = geometry.p
        if not 1 - geometry.L <= self.r <= geometry.M:
            return False
        if not 1 <= self.j <= p - 1:
            return False
        den = self.n.denominator
        k = _int_order(den, p)
        if p**k != den:
            return False
        # n in p^{r-M} Z_p  <=>  denominator divides p^{M-r}
        return k <= geometry.M - self.r

    def check(self, geometry: GridGeometry) -> "WaveletIndex":
        if not self.is_admissible(geometry):
            raise GeometryError(f"wavelet {self} is not admissible on {geometry}")
        return self

    def label(self) -> str:
        return f"(r={self.r}, n={self.n}, j={self.j})"


def scale_count(geometry: GridGeometry, r: int) -> int:
    """Number of admissible wavelets at scale ``r``: ``(p - 1) p^{M - r}``."""
    if not 1 - geometry.L <= r <= geometry.M:
        return 0
    return (geometry.p - 1) * geometry.p ** (geometry.M - r)


def admissible_wavelets(geometry: GridGeometry) -> list[WaveletIndex]:
    """All grid-admissible wavelets, coarsest scale (``r = M``) first."""
    p, out = geometry.p, []
    for r in range(geometry.M, -geometry.L, -1):
        ps = p ** (geometry.M - r)
        for a in range(ps):
            n = Fraction(a, ps)
            for j in range(1, p):
                out.append(WaveletIndex(r, n, j))
    return out


def _wavelet_argument(w: WaveletIndex, x: GridPoint) -> Fraction:
    return Fraction(x.geometry.p) ** w.r * x.value - w.n


def wavelet_eval(w: WaveletIndex, x: GridPoint, geometry: GridGeometry | None = None) -> complex:
    """``Psi_{rnj}(x)`` evaluated through the exact rational layer."""
    geometry = geometry or x.geometry
    if x.geometry != geometry:
        raise GeometryError("grid point belongs to a different geometry")
    w.check(geometry)
    p = geometry.p
    y = _wavelet_argument(w, x)
    if padic_norm(y, p) > 1:
        return 0j
    c, s = unit_phase(fractional_part(Fraction(w.j, p) * y, p))
    amp = float(p) ** (-w.r / 2.0)
    return complex(amp * c, amp * s)


def real_wavelet_eval(w: WaveletIndex, phase: str, x: GridPoint,
                      geometry: GridGeometry | None = None) -> float:
    """cos-form (``Re Psi``) or sin-form (``Im Psi``) of the wavelet at ``x``."""
    value = wavelet_eval(w, x, geometry)
    if phase == "cos":
        return value.real
    if phase == "sin":
        return value.imag
    raise ValueError(f"phase must be 'cos' or 'sin', got {phase!r}")


def _phase_table(p: int, form: str) -> np.ndarray:
    pairs = [unit_phase(Fraction(k, p)) for k in range(p)]
    if form == "cos":
        return np.array([c for c, _ in pairs])
    if form == "sin":
        return np.array([s for _, s in pairs])
    if form == "complex":
        return np.array([complex(c, s) for c, s in pairs])
    raise ValueError(f"form must be 'complex', 'cos' or 'sin', got {form!r}")


def wavelet_samples(w: WaveletIndex, geometry: GridGeometry, form: str = "complex") -> np.ndarray:
    """Vector of wavelet values on the whole grid.

    On the grid ``p^r x - n = p^{-s}(I~ - a)`` with ``s = M - r``, so the
    support is the residue class ``I~ = a (mod p^s)`` and the phase is
    ``j d_s / p`` where ``d_s`` is digit ``s`` of the label.
    """
    w.check(geometry)
    p = geometry.p
    s = w.level(geometry)
    a = w.offset(geometry)
    ps = p**s
    idx = np.arange(geometry.N, dtype=np.int64)
    digit = (idx // ps) % p
    table = _phase_table(p, form)
    values = table[(w.j * digit) % p] * (float(p) ** (-w.r / 2.0))
    return np.where(idx % ps == a, values, 0)


def wavelet_matrix(geometry: GridGeometry, form: str = "complex",
                   wavelets: list[WaveletIndex] | None = None) -> np.ndarray:
    """``(N, K)`` matrix whose columns are sampled wavelets."""
    wavelets = admissible_wavelets(geometry) if wavelets is None else wavelets
    dtype = complex if form == "complex" else float
    out = np.zeros((geometry.N, len(wavelets)), dtype=dtype)
    for col, w in enumerate(wavelets):
        out[:, col] = wavelet_samples(w, geometry, form)
    return out


# ---------------------------------------------------------------------------
# Tree reductions shared by the operator, projections and clustering
# ---------------------------------------------------------------------------


def _tile(arr: np.ndarray, reps: int) -> np.ndarray:
    """Repeat ``arr`` ``reps`` times along axis 0 (``np.tile`` without its overhead)."""
    arr = np.asarray(arr)
    return np.broadcast_to(arr, (reps,) + arr.shape).reshape((reps * arr.shape[0],) + arr.shape[1:])


def subtree_sums(x: np.ndarray, geometry: GridGeometry) -> list[np.ndarray]:
    """Per-node partial sums, bottom-up.

    Entry ``s`` has length ``p^s`` and holds, for each residue ``c`` modulo
    ``p^s``, the sum of ``x`` over the labels congruent to ``c``.  The last
    entry is ``x`` itself.  Trailing axes of ``x`` are carried along.
    """
    p, n = geometry.p, geometry.levels
    sums = [None] * (n + 1)
    sums[n] = np.asarray(x)
    for s in range(n - 1, -1, -1):
        child = sums[s + 1]
        sums[s] = child.reshape((p, p**s) + child.shape[1:]).sum(axis=0)
    return sums


def expand_level(values: np.ndarray, geometry: GridGeometry, s: int) -> np.ndarray:
    """Broadcast per-node values at level ``s`` back to the ``N`` leaves."""
    return _tile(np.asarray(values), geometry.p ** (geometry.levels - s))
