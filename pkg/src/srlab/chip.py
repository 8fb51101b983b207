"""
Magnetic coupling of trapped atoms to an on-chip LC loop.

The resonator field at position ``x`` is written as
``B(x) = mu0 I b(x) / (4 pi d)`` with a dimensionless mode function ``b``.
For a polygonal loop of straight wires ``b`` is evaluated in closed form
(Biot-Savart for finite segments). The single-photon coupling of the
``|1,0> -> |2,0>`` hyperfine transition is then ``g(x) = -G b_z(x)``, with
``G = mu_B mu0 / (4 pi d) * sqrt(omega / (2 hbar L))``.

Atom positions in a harmonic trap are classical Gaussian variables whose
width follows the thermal oscillator distribution. Histogramming ``g`` over
sampled positions gives the coupling-constant distribution, and its first
three moments can be matched onto two homogeneous subensembles.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import constants as C

__all__ = [
    "CircuitSpec",
    "LoopGeometry",
    "TrapSpec",
    "Moments",
    "TwoEnsembleSplit",
    "SingularPointError",
    "DegenerateDistribution",
    "mode_function",
    "segment_field",
    "coupling_scale",
    "coupling",
    "thermal_length",
    "sample_positions",
    "child_seed",
    "coupling_distribution",
    "CouplingHistogram",
    "sample_moments",
    "two_point_moments",
    "match_two_ensembles",
    "two_point_parameters",
    "regime_check",
    "RegimeReport",
    "RegimeItem",
]


class SingularPointError(ValueError):
    """Field requested too close to a wire."""


class DegenerateDistribution(UserWarning):
    pass


@dataclass(frozen=True)
class CircuitSpec:
    """LC resonator parameters.

    ``omega`` and ``kappa`` are angular rates (rad/s). Give either ``kappa``
    or ``quality``; if both are given they must satisfy ``kappa = omega/Q``.
    """

    inductance: float
    omega: float
    d: float
    kappa: float | None = None
    quality: float | None = None

    def __post_init__(self):
        for name in ("inductance", "omega", "d"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        kappa, q = self.kappa, self.quality
        if kappa is None and q is not None:
            if not q > 0:
                raise ValueError("quality must be positive")
            object.__setattr__(self, "kappa", self.omega / q)
        elif kappa is not None and q is None:
            if not kappa > 0:
                raise ValueError("kappa must be positive")
            object.__setattr__(self, "quality", self.omega / kappa)
        elif kappa is not None and q is not None:
            if not (kappa > 0 and q > 0):
                raise ValueError("kappa and quality must be positive")
            if not math.isclose(kappa, self.omega / q, rel_tol=1e-6):
                raise ValueError(f"kappa={kappa} inconsistent with omega/Q={self.omega / q}")


@dataclass(frozen=True)
class LoopGeometry:
    """Closed polygonal wire loop in the z=0 plane.

    Current runs from corner ``i`` to corner ``i+1`` (and back to the first
    corner) when ``orientation = +1``; ``-1`` reverses it.
    """

    corners: np.ndarray
    orientation: int = 1

    def __post_init__(self):
        c = np.asarray(self.corners, dtype=float)
        if c.ndim != 2 or c.shape[1] != 3 or c.shape[0] < 3:
            raise ValueError("corners must be an (n>=3, 3) array")
        if np.any(np.abs(c[:, 2]) > 0):
            raise ValueError("loop corners must lie in the z=0 plane")
        if np.any(np.linalg.norm(np.roll(c, -1, axis=0) - c, axis=1) == 0):
            raise ValueError("consecutive corners must be distinct")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        object.__setattr__(self, "corners", c)

    @classmethod
    def square(cls, d: float, orientation: int = 1) -> "LoopGeometry":
        return cls(
            np.array([[0.0, 0.0, 0.0], [d, 0.0, 0.0], [d, d, 0.0], [0.0, d, 0.0]]),
            orientation,
        )

    def segments(self):
        c = self.corners
        if self.orientation < 0:
            c = c[::-1]
        return list(zip(c, np.roll(c, -1, axis=0)))


@dataclass(frozen=True)
class TrapSpec:
    """Harmonic trap: angular frequencies (rad/s), center (m), T (K), mass (kg)."""

    omega_trap: tuple
    center: tuple
    temperature: float
    mass: float = C.M_RB87

    def __post_init__(self):
        w = np.asarray(self.omega_trap, dtype=float).reshape(-1)
        c = np.asarray(self.center, dtype=float).reshape(-1)
        if w.size != 3 or c.size != 3:
            raise ValueError("omega_trap and center need three components")
        if np.any(w <= 0):
            raise ValueError("trap frequencies must be positive")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        object.__setattr__(self, "omega_trap", tuple(w))
        object.__setattr__(self, "center", tuple(c))


@dataclass(frozen=True)
class Moments:
    mean_g: float
    var_g: float
    skew_g: float

    def __post_init__(self):
        if self.var_g < 0:
            raise ValueError("variance must be non-negative")


@dataclass(frozen=True)
class TwoEnsembleSplit:
    """Two homogeneous subensembles with couplings ``g1 = g_ref (1 + dg)``, ``g2 = g_ref (1 - dg)``."""

    n1: int
    n2: int
    g1: float
    g2: float
    g_ref: float = field(init=False)
    dg_tilde: float = field(init=False)

    def __post_init__(self):
        if self.n1 < 0 or self.n2 < 0 or self.n1 + self.n2 < 1:
            raise ValueError("need n1, n2 >= 0 and n1 + n2 >= 1")
        g_ref = 0.5 * (self.g1 + self.g2)
        object.__setattr__(self, "g_ref", g_ref)
        dg = 0.0 if g_ref == 0 else (self.g1 - self.g2) / (2 * g_ref)
        object.__setattr__(self, "dg_tilde", dg)

    @classmethod
    def from_dg(cls, n1: int, n2: int, dg_tilde: float, g_ref: float = 1.0) -> "TwoEnsembleSplit":
        return cls(n1, n2, g_ref * (1 + dg_tilde), g_ref * (1 - dg_tilde))

    @property
    def n(self) -> int:
        return self.n1 + self.n2

    @property
    def j1(self) -> float:
        return self.n1 / 2

    @property
    def j2(self) -> float:
        return self.n2 / 2

    @property
    def jmax(self) -> float:
        return self.n / 2


# ---------------------------------------------------------------------------
# field and coupling


def _point_segment_distance(x, a, b):
    ab = b - a
    t = np.clip(((x - a) @ ab) / (ab @ ab), 0.0, 1.0)
    return np.linalg.norm(x - (a + t[..., None] * ab), axis=-1)


def segment_field(x, a, b, cutoff: float = 1e-9) -> np.ndarray:
    """Biot-Savart field of a straight segment a -> b in units of ``mu0 I / (4 pi)``.

    Uses ``B = (r1 x r2)(|r1| + |r2|) / (|r1||r2|(|r1||r2| + r1.r2))`` with
    ``r1 = x - a`` and ``r2 = x - b``.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(_point_segment_distance(x, a, b) < cutoff):
        raise SingularPointError(f"point within {cutoff} m of a wire")
    r1 = x - a
    r2 = x - b
    n1 = np.linalg.norm(r1, axis=-1)
    n2 = np.linalg.norm(r2, axis=-1)
    denom = n1 * n2 * (n1 * n2 + np.sum(r1 * r2, axis=-1))
    return np.cross(r1, r2) * ((n1 + n2) / denom)[..., None]


def mode_function(x, loop: LoopGeometry, d: float, cutoff: float = 1e-9) -> np.ndarray:
    """Dimensionless mode function ``b(x) = 4 pi d B(x) / (mu0 I)``.

    ``x`` may be a single point or an array of shape ``(..., 3)``.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros(np.broadcast_shapes(x.shape, (3,)))
    for a, b in loop.segments():
        out += segment_field(x, a, b, cutoff)
    return d * out


def coupling_scale(circuit: CircuitSpec) -> float:
    """``G = mu_B mu0 / (4 pi d) sqrt(omega / (2 hbar L))`` in rad/s."""
    return (
        C.MU_B * C.MU_0 / (4 * math.pi * circuit.d)
        * math.sqrt(circuit.omega / (2 * C.HBAR * circuit.inductance))
    )


def coupling(x, circuit: CircuitSpec, loop: LoopGeometry | None = None) -> np.ndarray:
    """Single-atom coupling ``g(x) = -G b_z(x)`` in rad/s (sign kept)."""
    if loop is None:
        loop = LoopGeometry.square(circuit.d)
    b = mode_function(x, loop, circuit.d)
    return -coupling_scale(circuit) * b[..., 2]


# ---------------------------------------------------------------------------
# thermal cloud


def thermal_length(trap: TrapSpec) -> np.ndarray:
    """Per-axis width ``l_T = l coth^(1/2)(hbar Omega / 2 k_B T)``, ``l = sqrt(hbar / M Omega)``."""
    w = np.asarray(trap.omega_trap)
    l0 = np.sqrt(C.HBAR / (trap.mass * w))
    x = C.HBAR * w / (2 * C.K_B * trap.temperature)
    return l0 / np.sqrt(np.tanh(x))


def child_seed(master: int, index: int) -> np.random.SeedSequence:
    """Independent stream for work item ``index`` derived from ``master``."""
    return np.random.SeedSequence(entropy=int(master), spawn_key=(int(index),))


def sample_positions(trap: TrapSpec, n: int, seed) -> np.ndarray:
    """Draw ``n`` classical atom positions, shape ``(n, 3)``.

    The density ``exp(-xi^2 / l_T^2)/(sqrt(pi) l_T)`` per axis is a Gaussian
    with standard deviation ``l_T / sqrt(2)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    sigma = thermal_length(trap) / math.sqrt(2)
    return rng.normal(loc=trap.center, scale=sigma, size=(n, 3))


@dataclass
class CouplingHistogram:
    edges: np.ndarray
    density: np.ndarray
    g_over_G: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    def integral(self) -> float:
        return float(np.sum(self.density * np.diff(self.edges)))


def coupling_distribution(
    trap: TrapSpec,
    circuit: CircuitSpec,
    loop: LoopGeometry | None = None,
    n_samples: int = 100_000,
    seed=0,
    bins=100,
    range=None,
) -> CouplingHistogram:
    """Monte Carlo estimate of the density of ``g/G`` over the thermal cloud.

    Positions closer than the wire cutoff are resampled out (they have
    measure zero for any realistic trap).
    """
    if loop is None:
        loop = LoopGeometry.square(circuit.d)
    x = sample_positions(trap, n_samples, seed)
    keep = np.ones(len(x), dtype=bool)
    for a, b in loop.segments():
        keep &= _point_segment_distance(x, a, b) >= 1e-9
    b = mode_function(x[keep], loop, circuit.d)
    ratio = -b[:, 2]
    density, edges = np.histogram(ratio, bins=bins, range=range, density=True)
    return CouplingHistogram(edges, density, ratio)


# ---------------------------------------------------------------------------
# moment matching


def sample_moments(g) -> Moments:
    g = np.asarray(g, dtype=float)
    mean = float(np.mean(g))
    dg = g - mean
    return Moments(mean, float(np.mean(dg**2)), float(np.mean(dg**3)))


def two_point_moments(n1: int, n2: int, g1: float, g2: float) -> Moments:
    """Moments of the distribution with ``n1`` atoms at ``g1`` and ``n2`` at ``g2``."""
    n = n1 + n2
    p, q = n1 / n, n2 / n
    mean = p * g1 + q * g2
    a, b = g1 - mean, g2 - mean
    return Moments(mean, p * a * a + q * b * b, p * a**3 + q * b**3)


def two_point_parameters(moments: Moments) -> tuple[float, float, float]:
    """Unrounded solution ``(p1, g1, g2)`` of the two-point moment system.

    With ``a = g1 - <g>``, ``b = g2 - <g>`` and weights ``p1 = N1/N``,
    ``p2 = 1 - p1`` the conditions ``p1 a + p2 b = 0``, ``p1 a^2 + p2 b^2 = s2``
    and ``p1 a^3 + p2 b^3 = s3`` give ``-ab = s2`` and ``a + b = s3/s2``.
    The larger root is assigned to subensemble 1.
    """
    s2, s3 = moments.var_g, moments.skew_g
    if not s2 > 0:
        raise ValueError("variance must be positive for a two-point split")
    root = math.sqrt(s3 * s3 + 4 * s2**3)
    a = (s3 + root) / (2 * s2)
    b = (s3 - root) / (2 * s2)
    return -b / (a - b), moments.mean_g + a, moments.mean_g + b


def match_two_ensembles(moments: Moments, n: int) -> TwoEnsembleSplit:
    """Two-point split of ``n`` atoms reproducing mean, variance and third moment.

    ``N1 = round(n p1)`` with ``p1`` from :func:`two_point_parameters`. A
    distribution without spread returns all atoms in subensemble 1.
    """
    if not moments.var_g > 0:
        warnings.warn("coupling distribution has no spread", DegenerateDistribution, stacklevel=2)
        return TwoEnsembleSplit(n, 0, moments.mean_g, moments.mean_g)
    p1, g1, g2 = two_point_parameters(moments)
    n1 = int(round(n * p1))
    return TwoEnsembleSplit(n1, n - n1, g1, g2)


# ---------------------------------------------------------------------------
# validity regime


@dataclass(frozen=True)
class RegimeItem:
    name: str
    ratio: float
    description: str
    passed: bool


@dataclass
class RegimeReport:
    items: list[RegimeItem]
    n_upper: float
    n_lower: float
    t_max: float

    @property
    def passed(self) -> bool:
        return all(it.passed for it in self.items)

    def lines(self) -> list[str]:
        out = [
            f"N upper bound (kappa/g)^2       : {self.n_upper:.4g}",
            f"N lower bound v/(gamma d)       : {self.n_lower:.4g}",
            f"T upper bound M (kappa d)^2/k_B : {self.t_max:.4g} K",
        ]
        for it in self.items:
            flag = "PASS" if it.passed else "FAIL"
            out.append(f"[{flag}] {it.name:<16s} ratio={it.ratio:.3g}  {it.description}")
        return out


def regime_check(
    circuit: CircuitSpec,
    trap: TrapSpec,
    n_atoms: int,
    g_typ: float,
    threshold: float = 0.1,
) -> RegimeReport:
    """Check the bad-cavity, frozen-motion and classical-motion conditions.

    ``g_typ`` and ``circuit.kappa`` must be given in the same units (both
    angular or both cyclic); only their ratio and ``g^2/kappa`` enter. A
    "much less than" condition passes when the ratio is below ``threshold``.
    """
    kappa = circuit.kappa
    if kappa is None:
        raise ValueError("circuit needs kappa or quality for a regime check")
    g = abs(g_typ)
    gamma = g * g / kappa
    v = math.sqrt(C.K_B * trap.temperature / trap.mass)
    n_upper = (kappa / g) ** 2
    n_lower = v / (gamma * circuit.d)
    t_max = trap.mass * (kappa * circuit.d) ** 2 / C.K_B
    items = [
        RegimeItem(
            "superradiance",
            math.sqrt(n_atoms) * g / kappa,
            "sqrt(N) g << kappa",
            math.sqrt(n_atoms) * g / kappa < threshold,
        ),
        RegimeItem(
            "frozen-motion",
            n_lower / n_atoms,
            "N >> sqrt(k_B T / M) / (gamma d)",
            n_lower / n_atoms < threshold,
        ),
        RegimeItem(
            "temperature",
            trap.temperature / t_max,
            "T << M (kappa d)^2 / k_B",
            trap.temperature / t_max < threshold,
        ),
    ]
    for axis, w in zip("xyz", trap.omega_trap):
        r = C.HBAR * w / (2 * C.K_B * trap.temperature)
        items.append(
            RegimeItem(f"classical-{axis}", r, "hbar Omega / 2 << k_B T", r < threshold)
        )
    return RegimeReport(items, n_upper, n_lower, t_max)
