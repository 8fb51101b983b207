"""
Homogeneous superradiant propagator over all SU(2) sectors.

A density-matrix element ``<alpha; j, m+k| rho |alpha'; j', m-k>`` is labelled
by its sector ``x = (j, j', k)`` and center-of-mass index ``m``. Under the
homogeneous master equation (rescaled time ``tau = 2 J gamma t``)

    d rho_m / d tau = a_{m+1}(x) rho_{m+1} - b_m(x) rho_m

so each sector evolves independently through an upper-bidiagonal generator.
The propagator ``D(x, tau)`` is the matrix exponential of that generator,
indexed by ``m`` ascending from ``n_lo(x)`` to ``n_hi(x)``.

Coherence propagators are related to probability propagators by

    D_mn(x, tau) = exp[(j(j+1) - j'(j'+1) + 2k^2) tau / 2J] Q(x, m, n) D_mn(j, j, 0, tau)

which :func:`propagate_coherence_via_probability` evaluates as an
independent route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .qnum import HalfInt, InvalidQuantumNumber, _twice

__all__ = [
    "Sector",
    "BlockDensity",
    "OutOfSectorRange",
    "PoleHit",
    "rate_coeffs",
    "generator",
    "propagator",
    "propagate_block",
    "laplace_gain",
    "q_factor",
    "propagate_coherence_via_probability",
    "dfs_dimension",
]


class OutOfSectorRange(ValueError):
    pass


class PoleHit(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class Sector:
    """Conserved block label ``x = (j, j', k)`` plus opaque degeneracy labels."""

    j: HalfInt
    jp: HalfInt
    k: HalfInt
    alpha: object = None
    alpha_p: object = None

    def __post_init__(self):
        for name in ("j", "jp", "k"):
            v = getattr(self, name)
            if not isinstance(v, HalfInt):
                object.__setattr__(self, name, HalfInt.of(v))
        tj, tjp = self.j.twice, self.jp.twice
        if tj < 0 or tjp < 0:
            raise InvalidQuantumNumber("j and j' must be non-negative")
        if (tj - tjp) % 2:
            raise InvalidQuantumNumber("j and j' must both be integer or both half-integer")
        if self.lo_twice > self.hi_twice:
            raise InvalidQuantumNumber(f"empty m-range for sector {self}")

    @property
    def lo_twice(self) -> int:
        tj, tjp, tk = self.j.twice, self.jp.twice, self.k.twice
        return max(-tj - tk, -tjp + tk)

    @property
    def hi_twice(self) -> int:
        tj, tjp, tk = self.j.twice, self.jp.twice, self.k.twice
        return min(tj - tk, tjp + tk)

    @property
    def m_values(self) -> np.ndarray:
        """Allowed center-of-mass indices, ascending."""
        return np.arange(self.lo_twice, self.hi_twice + 1, 2) / 2

    @property
    def size(self) -> int:
        return (self.hi_twice - self.lo_twice) // 2 + 1

    def index(self, m) -> int:
        tm = _twice(m)
        if tm < self.lo_twice or tm > self.hi_twice or (tm - self.lo_twice) % 2:
            raise OutOfSectorRange(f"m = {tm / 2} outside sector range {self.m_values}")
        return (tm - self.lo_twice) // 2

    @property
    def key(self) -> tuple:
        return (self.j.twice, self.jp.twice, self.k.twice)

    def conjugate(self) -> "Sector":
        """Sector ``(j', j, -k)`` of the Hermitian-conjugate elements."""
        return Sector(self.jp, self.j, -self.k, self.alpha_p, self.alpha)


@dataclass
class BlockDensity:
    """Elements ``rho_m(x)`` of one sector, ``m`` ascending.

    ``J`` is the global time-scale parameter ``j_max + 1/2``; it defaults to
    ``max(j, j') + 1/2``.
    """

    sector: Sector
    values: np.ndarray
    J: float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (self.sector.size,):
            raise ValueError(
                f"expected {self.sector.size} values for sector, got {self.values.shape}"
            )
        if self.J is None:
            self.J = max(self.sector.j.twice, self.sector.jp.twice) / 2 + 0.5


def _d2(tj: int, tmu: int) -> float:
    # d_-(j, mu)^2 = (j + mu)(j - mu + 1), zero outside the ladder
    if abs(tmu) > tj:
        return 0.0
    return (tj + tmu) * (tj - tmu + 2) / 4.0


def rate_coeffs(x: Sector, m, J: float) -> tuple[float, float]:
    """Coefficients ``(a_m(x), b_m(x))`` of the sector equation."""
    tm = _twice(m)
    x.index(tm / 2)
    tj, tjp, tk = x.key
    a = math.sqrt(_d2(tj, tm + tk) * _d2(tjp, tm - tk)) / J
    # d_+(j, mu - 1) d_-(j, mu) = d_-(j, mu)^2
    b = (_d2(tj, tm + tk) + _d2(tjp, tm - tk)) / (2 * J)
    return a, b


def _rates(x: Sector, J: float) -> tuple[np.ndarray, np.ndarray]:
    a = np.empty(x.size)
    b = np.empty(x.size)
    for i, m in enumerate(x.m_values):
        a[i], b[i] = rate_coeffs(x, m, J)
    return a, b


def _bidiagonal(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    g = np.diag(-b)
    g[np.arange(len(a) - 1), np.arange(1, len(a))] = a[1:]
    return g


def generator(x: Sector, J: float) -> np.ndarray:
    """Generator matrix ``G`` with ``d rho / d tau = G rho`` in sector ``x``."""
    return _bidiagonal(*_rates(x, J))


@lru_cache(maxsize=4096)
def _propagator_cached(key: tuple, tau: float, J: float) -> np.ndarray:
    x = Sector(HalfInt(key[0]), HalfInt(key[1]), HalfInt(key[2]))
    out = expm(generator(x, J) * tau)
    out.setflags(write=False)
    return out


def propagator(x: Sector, tau: float, J: float) -> np.ndarray:
    """Propagator matrix ``D(x, tau)``, rows/columns are ``m``/``n`` ascending.

    Returned arrays are cached and read-only.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    return _propagator_cached(x.key, float(tau), float(J))


def propagate_block(block: BlockDensity, tau: float) -> BlockDensity:
    """Evolve one sector block by ``tau``."""
    if tau == 0:
        return BlockDensity(block.sector, block.values.copy(), block.J)
    D = propagator(block.sector, tau, block.J)
    return BlockDensity(block.sector, D @ block.values, block.J)


def laplace_gain(x: Sector, m, n, z: complex, J: float) -> complex:
    """Laplace-domain propagator ``D~_mn(x, z)`` for ``m <= n``.

    Evaluated as ``prod_{l=m+1..n} a_l / prod_{l=m..n} (z + b_l)``, which is
    the closed product form with the leading ``a_m`` cancelled.
    """
    i, k = x.index(m), x.index(n)
    if i > k:
        return 0.0
    a, b = _rates(x, J)
    out = complex(1.0)
    for l in range(i, k + 1):
        den = z + b[l]
        if abs(den) < 1e-14:
            raise PoleHit(f"z = {z} coincides with pole -b_l = {-b[l]}")
        out /= den
        if l > i:
            out *= a[l]
    return out


def _q(tj: int, tjp: int, tk: int, tl: int) -> float:
    # all factors in units of 1/2; each product term is (2x)/2
    num = (tj - tk - tl + 2) * (tj + tk + tl) * (tjp + tk - tl + 2) * (tjp - tk + tl)
    den = (tj + tl) * (tj - tl + 2)
    if den == 0:
        raise OutOfSectorRange("q_l undefined: l at the edge of the j ladder")
    return math.sqrt(max(num, 0) / 16.0) / (den / 4.0)


def q_factor(x: Sector, m, n) -> float:
    """``Q(x, m, n) = prod_{l=m+1..n} q_l(x)``."""
    i, k = x.index(m), x.index(n)
    if i > k:
        raise OutOfSectorRange("q_factor needs m <= n")
    tj, tjp, tk = x.key
    out = 1.0
    for l in range(i + 1, k + 1):
        out *= _q(tj, tjp, tk, x.lo_twice + 2 * l)
    return out


def _reference_propagator(x: Sector, tau: float, J: float) -> np.ndarray:
    # D(j, j, 0, tau) on the index set of x: a_l = b_l = (j+l)(j-l+1)/J
    tj = x.j.twice
    l2 = np.arange(x.lo_twice, x.hi_twice + 1, 2)
    rate = (tj + l2) * (tj - l2 + 2) / (4.0 * J)
    return expm(_bidiagonal(rate, rate) * tau)


def propagate_coherence_via_probability(x: Sector, m, n, tau: float, J: float) -> float:
    """``D_mn(x, tau)`` from the probability propagator of the ``j`` ladder.

    For ``j' > j`` the identical propagator of the conjugate sector
    ``(j', j, -k)`` is used, so that ``Q`` stays finite.
    """
    if x.jp.twice > x.j.twice:
        return propagate_coherence_via_probability(x.conjugate(), m, n, tau, J)
    i, k = x.index(m), x.index(n)
    if i > k:
        return 0.0
    j, jp, kk = x.j.twice / 2, x.jp.twice / 2, x.k.twice / 2
    shift = (j * (j + 1) - jp * (jp + 1) + 2 * kk * kk) / (2 * J)
    D0 = _reference_propagator(x, tau, J)
    return math.exp(shift * tau) * q_factor(x, m, n) * D0[i, k]


def dfs_dimension(n_atoms: int) -> int:
    """Number of states annihilated by the collective lowering operator."""
    if n_atoms < 1:
        raise ValueError("n_atoms must be >= 1")
    return math.comb(n_atoms, n_atoms // 2)
