"""
Stochastic Schroedinger trajectories for two inhomogeneous subensembles.

States live in the product basis ``|j1 m1> (x) |j2 m2>`` with ``m``
descending (index ``i = j - m``) and flat index ``i1 * (2 j2 + 1) + i2``.
The collective operator is ``L = g1 J1- + g2 J2-`` with
``g1, g2 = 1 +/- dg``. In rescaled time the unravelled master equation is

    d rho / d tau = (1/2J) (2 L rho L+ - {L+ L, rho})

and each trajectory follows the diffusive (Ito) update

    d psi = D1 psi d tau + D2 psi dW
    D1 = (1/2J) (2 conj(l) L - L+ L - |l|^2),   D2 = (L - l) / sqrt(J)

where ``l = <psi|L|psi>``. Steps use Euler-Maruyama followed by explicit
renormalization.

Noise for trajectory ``i`` comes from ``numpy.random.default_rng`` seeded by
``SeedSequence(entropy=seed, spawn_key=(i,))`` and is drawn as one
contiguous stream of ``n_steps`` standard normals, so every trajectory is
reproducible on its own and independent of batching or thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .chip import TwoEnsembleSplit, child_seed
from .qnum import _twice

__all__ = [
    "NumericalFailure",
    "RankAmbiguous",
    "SseConfig",
    "TrajectoryRecord",
    "EnsembleStats",
    "ProductOperators",
    "build_collective_lowering",
    "product_operators",
    "excited_state",
    "expectation_jz",
    "sse_step",
    "run_trajectory",
    "run_batch",
    "ensemble_stats",
    "dark_space",
    "full_space_lowering",
    "rotated_singlet",
    "lindblad_generator",
    "lindblad_reference",
    "lindblad_jz",
]

ZERO_SV = 1e-10
GAP_BAND = (1e-12, 1e-8)


class NumericalFailure(RuntimeError):
    """A trajectory produced a non-finite state."""


class RankAmbiguous(RuntimeError):
    """Singular values fall inside the ambiguity band."""


# ---------------------------------------------------------------------------
# operators


def _lowering(j) -> sp.csr_matrix:
    # m descending: J- maps index i (m = j - i) to i + 1
    t = _twice(j)
    i = np.arange(t)
    tm = t - 2 * i
    vals = np.sqrt((t + tm) * (t - tm + 2) / 4.0)
    return sp.csr_matrix((vals, (i + 1, i)), shape=(t + 1, t + 1))


def _jz(j) -> sp.csr_matrix:
    t = _twice(j)
    return sp.diags(np.arange(t, -t - 1, -2) / 2.0, format="csr")


@dataclass(frozen=True)
class ProductOperators:
    """Sparse product-basis operators for one split."""

    split: TwoEnsembleSplit
    lower: sp.csr_matrix  # L = g1 J1- + g2 J2-
    jz: sp.csr_matrix
    J: float

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def jmax(self) -> float:
        return self.split.jmax


def build_collective_lowering(split: TwoEnsembleSplit) -> sp.csr_matrix:
    """``g1 J1- + g2 J2-`` in the product basis, couplings relative to ``g_ref``."""
    g1 = split.g1 / split.g_ref
    g2 = split.g2 / split.g_ref
    i1 = sp.identity(split.n1 + 1, format="csr")
    i2 = sp.identity(split.n2 + 1, format="csr")
    out = g1 * sp.kron(_lowering(split.j1), i2) + g2 * sp.kron(i1, _lowering(split.j2))
    return sp.csr_matrix(out)


def product_operators(split: TwoEnsembleSplit) -> ProductOperators:
    i1 = sp.identity(split.n1 + 1, format="csr")
    i2 = sp.identity(split.n2 + 1, format="csr")
    jz = sp.csr_matrix(sp.kron(_jz(split.j1), i2) + sp.kron(i1, _jz(split.j2)))
    return ProductOperators(split, build_collective_lowering(split), jz, split.jmax + 0.5)


def excited_state(split: TwoEnsembleSplit) -> np.ndarray:
    """Fully excited product state ``|j1 j1>|j2 j2>``."""
    psi = np.zeros((split.n1 + 1) * (split.n2 + 1))
    psi[0] = 1.0
    return psi


def expectation_jz(psi: np.ndarray, ops: ProductOperators) -> np.ndarray:
    """``<J_z>`` for a state or a batch ``(n, dim)`` of states."""
    diag = ops.jz.diagonal()
    return np.real(np.abs(psi) ** 2 @ diag)


# ---------------------------------------------------------------------------
# stepping


def _drift_diffusion(psi: np.ndarray, L: np.ndarray, LdL: np.ndarray, J: float):
    # psi: (n, dim); L, LdL dense (dim, dim); returns D1 psi, D2 psi
    lpsi = psi @ L.T
    llpsi = psi @ LdL.T
    ell = np.einsum("ij,ij->i", psi.conj(), lpsi)
    ell = ell[:, None]
    d1 = (2 * ell.conj() * lpsi - llpsi - np.abs(ell) ** 2 * psi) / (2 * J)
    d2 = (lpsi - ell * psi) / math.sqrt(J)
    return d1, d2


def sse_step(psi, d_tau: float, dW, op, J: float | None = None, renormalize: bool = True):
    """One Euler-Maruyama step for a state ``(dim,)`` or batch ``(n, dim)``.

    ``op`` is the collective lowering operator (sparse or dense) or a
    :class:`ProductOperators`, in which case ``J`` is taken from it.
    """
    if isinstance(op, ProductOperators):
        J = op.J if J is None else J
        op = op.lower
    if J is None:
        raise ValueError("J must be given with a bare operator")
    L = op.toarray() if sp.issparse(op) else np.asarray(op)
    psi = np.asarray(psi)
    single = psi.ndim == 1
    batch = np.atleast_2d(psi)
    dW = np.atleast_1d(np.asarray(dW, dtype=float))[:, None]
    if not np.all(np.isfinite(dW)):
        raise ValueError("dW must be finite")
    d1, d2 = _drift_diffusion(batch, L, L.conj().T @ L, J)
    out = batch + d1 * d_tau + d2 * dW
    if renormalize:
        out = out / np.linalg.norm(out, axis=1, keepdims=True)
    if not np.all(np.isfinite(out)):
        raise NumericalFailure("non-finite amplitudes after SSE step")
    return out[0] if single else out


@dataclass(frozen=True)
class SseConfig:
    """Trajectory-ensemble settings (dimensionless time)."""

    split: TwoEnsembleSplit
    d_tau: float = 1e-3
    tau_max: float = 5.0
    n_traj: int = 1000
    seed: int = 0
    record_grid: tuple = (0.0, 0.5, 1.0, 2.0, 5.0)

    def __post_init__(self):
        object.__setattr__(self, "record_grid", tuple(float(t) for t in self.record_grid))
        if not self.d_tau > 0:
            raise ValueError("d_tau must be positive")
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        if self.record_grid and (min(self.record_grid) < 0 or max(self.record_grid) > self.tau_max + 1e-12):
            raise ValueError("record_grid must lie in [0, tau_max]")

    @property
    def n_steps(self) -> int:
        return int(round(self.tau_max / self.d_tau))

    def record_steps(self) -> np.ndarray:
        return np.array([int(round(t / self.d_tau)) for t in self.record_grid], dtype=int)


@dataclass
class TrajectoryRecord:
    seed_index: int
    jz_over_j: np.ndarray
    final_jz_over_j: float


def _noise(config: SseConfig, traj_index: int) -> np.ndarray:
    rng = np.random.default_rng(child_seed(config.seed, traj_index))
    return rng.standard_normal(config.n_steps) * math.sqrt(config.d_tau)


def run_batch(config: SseConfig, indices, psi0=None) -> np.ndarray:
    """``<J_z>/j`` of trajectories ``indices`` on the record grid plus the final time.

    Returns shape ``(len(indices), len(record_grid) + 1)``; the last column
    is the value at ``tau_max``.
    """
    ops = product_operators(config.split)
    # sparse products keep each trajectory's arithmetic independent of the
    # batch shape (dense BLAS switches kernels and rounding with it)
    L = ops.lower.tocsr()
    LdL = (L.T @ L).tocsr()
    diag = ops.jz.diagonal()
    jmax = ops.jmax
    indices = list(indices)
    psi = np.tile(excited_state(config.split) if psi0 is None else np.asarray(psi0), (len(indices), 1))
    if np.iscomplexobj(psi):
        LdL = (L.conj().T @ L).tocsr()
    noise = np.stack([_noise(config, i) for i in indices])
    rec = config.record_steps()
    out = np.empty((len(indices), len(rec) + 1))
    sqJ = math.sqrt(ops.J)
    inv2J = 1.0 / (2 * ops.J)
    dt = config.d_tau
    real = not np.iscomplexobj(psi)
    for col in np.flatnonzero(rec == 0):
        out[:, col] = (np.abs(psi) ** 2 * diag).sum(axis=1) / jmax
    for step in range(config.n_steps):
        lpsi = (L @ psi.T).T
        llpsi = (LdL @ psi.T).T
        if real:
            ell = (psi * lpsi).sum(axis=1, keepdims=True)
            d1 = (2 * ell * lpsi - llpsi - ell * ell * psi) * inv2J
        else:
            ell = (psi.conj() * lpsi).sum(axis=1, keepdims=True)
            d1 = (2 * ell.conj() * lpsi - llpsi - np.abs(ell) ** 2 * psi) * inv2J
        d2 = (lpsi - ell * psi) / sqJ
        psi = psi + d1 * dt + d2 * noise[:, step : step + 1]
        psi /= np.sqrt((np.abs(psi) ** 2).sum(axis=1, keepdims=True))
        hits = np.flatnonzero(rec == step + 1)
        if hits.size:
            if not np.all(np.isfinite(psi)):
                raise NumericalFailure(f"non-finite amplitudes by step {step + 1}")
            val = (np.abs(psi) ** 2 * diag).sum(axis=1) / jmax
            for col in hits:
                out[:, col] = val
    if not np.all(np.isfinite(psi)):
        raise NumericalFailure("non-finite amplitudes at tau_max")
    out[:, -1] = (np.abs(psi) ** 2 * diag).sum(axis=1) / jmax
    return out


def run_trajectory(config: SseConfig, traj_index: int, psi0=None) -> TrajectoryRecord:
    """One trajectory from the fully excited state (or ``psi0``)."""
    row = run_batch(config, [traj_index], psi0)[0]
    return TrajectoryRecord(traj_index, row[:-1], float(row[-1]))


@dataclass
class EnsembleStats:
    """Final-time statistics plus recorded-grid means and standard deviations."""

    final: np.ndarray
    mean: float
    std: float
    grid_mean: np.ndarray
    grid_std: np.ndarray
    edges: np.ndarray
    counts: np.ndarray
    config: SseConfig = field(repr=False)

    @property
    def stderr(self) -> float:
        return self.std / math.sqrt(len(self.final))

    @property
    def grid_stderr(self) -> np.ndarray:
        return self.grid_std / math.sqrt(len(self.final))


def ensemble_stats(
    config: SseConfig,
    bins: int = 50,
    threads: int = 1,
    batch_size: int = 1000,
    psi0=None,
) -> EnsembleStats:
    """Run ``n_traj`` trajectories and aggregate in ``traj_index`` order."""
    chunks = [
        range(s, min(s + batch_size, config.n_traj)) for s in range(0, config.n_traj, batch_size)
    ]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: run_batch(config, c, psi0), chunks))
    else:
        parts = [run_batch(config, c, psi0) for c in chunks]
    data = np.concatenate(parts, axis=0)
    final = data[:, -1]
    counts, edges = np.histogram(final, bins=bins, range=(-1.0, 1.0))
    return EnsembleStats(
        final=final,
        mean=float(final.mean()),
        std=float(final.std(ddof=1)) if len(final) > 1 else 0.0,
        grid_mean=data[:, :-1].mean(axis=0),
        grid_std=data[:, :-1].std(axis=0, ddof=1) if len(final) > 1 else np.zeros(data.shape[1] - 1),
        edges=edges,
        counts=counts,
        config=config,
    )


# ---------------------------------------------------------------------------
# dark states


def dark_space(op) -> np.ndarray:
    """Orthonormal kernel basis (columns) via SVD.

    Singular values below ``1e-10`` count as zero; any value inside the
    band ``(1e-12, 1e-8)`` makes the rank ambiguous and raises.
    """
    A = op.toarray() if sp.issparse(op) else np.asarray(op)
    if A.shape[1] > 10_000:
        raise ValueError("operator too large for dense factorization")
    _, s, vh = np.linalg.svd(A)
    s_full = np.zeros(A.shape[1])
    s_full[: len(s)] = s
    ambiguous = (s_full > GAP_BAND[0]) & (s_full < GAP_BAND[1])
    if np.any(ambiguous):
        raise RankAmbiguous(f"singular values {s_full[ambiguous]} inside the gap band")
    null = s_full < ZERO_SV
    return vh[null].conj().T


def full_space_lowering(couplings) -> sp.csr_matrix:
    """``sum_i g_i sigma_i^-`` on the full ``2^N`` space.

    Basis bit ``1`` is ground, bit ``0`` excited, spin 0 most significant.
    """
    g = np.asarray(couplings, dtype=float)
    n = len(g)
    dim = 2**n
    rows, cols, vals = [], [], []
    for s in range(dim):
        for i in range(n):
            bit = 1 << (n - 1 - i)
            if not s & bit:  # excited: lower it
                rows.append(s | bit)
                cols.append(s)
                vals.append(g[i])
    return sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))


def rotated_singlet(dg_tilde: float) -> np.ndarray:
    """Two-spin dark state ``(g2 |e g> - g1 |g e>)/norm`` in the product basis.

    Ordering is ``(|ee>, |eg>, |ge>, |gg>)``, which is the ``j1 = j2 = 1/2``
    product basis with ``m`` descending.
    """
    g1, g2 = 1 + dg_tilde, 1 - dg_tilde
    psi = np.array([0.0, g2, -g1, 0.0])
    return psi / np.hypot(g1, g2)


# ---------------------------------------------------------------------------
# exact master-equation oracle


def lindblad_generator(split: TwoEnsembleSplit) -> sp.csr_matrix:
    """Superoperator on row-major ``vec(rho)`` for the rescaled master equation."""
    ops = product_operators(split)
    L = ops.lower
    LdL = (L.conj().T @ L).tocsr()
    eye = sp.identity(ops.dim, format="csr")
    gen = 2 * sp.kron(L, L.conj()) - sp.kron(LdL, eye) - sp.kron(eye, LdL.T)
    return sp.csr_matrix(gen / (2 * ops.J))


def lindblad_reference(rho0, split: TwoEnsembleSplit, tau) -> np.ndarray:
    """Exact ``rho(tau)`` from the vectorized generator (``expm_multiply``).

    ``tau`` may be a scalar or a 1-D grid; grid output has shape
    ``(len(tau), dim, dim)``.
    """
    dim = (split.n1 + 1) * (split.n2 + 1)
    if dim > 70:
        raise ValueError("product dimension above 70 is outside the oracle's range")
    rho0 = np.asarray(rho0)
    if rho0.ndim == 1:
        rho0 = np.outer(rho0, rho0.conj())
    gen = lindblad_generator(split)
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    v0 = rho0.ravel().astype(np.result_type(rho0.dtype, float))
    out = np.empty((len(taus), dim, dim), dtype=v0.dtype)
    prev_t, v = 0.0, v0
    for i, t in enumerate(taus):
        if t < prev_t:
            v, prev_t = v0, 0.0
        v = expm_multiply(gen * (t - prev_t), v) if t > prev_t else v
        prev_t = t
        out[i] = v.reshape(dim, dim)
    return out if np.ndim(tau) else out[0]


def lindblad_jz(split: TwoEnsembleSplit, tau, rho0=None) -> np.ndarray:
    """``<J_z>(tau)`` of the exact master equation from the fully excited state."""
    rho0 = excited_state(split) if rho0 is None else rho0
    rho = lindblad_reference(rho0, split, np.atleast_1d(tau))
    diag = product_operators(split).jz.diagonal()
    out = np.real(np.einsum("tii,i->t", rho, diag))
    return out if np.ndim(tau) else out[0]
