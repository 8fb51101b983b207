"""
First-order perturbation theory in the coupling inhomogeneity.

Two subensembles with pseudo-spins ``j1 = N1/2`` and ``j2 = N2/2`` couple
with strengths ``g (1 +/- dg)``. To first order in ``dg`` the master equation
splits into

    d rho0 / d tau = L0[rho0]
    d rho1 / d tau = L0[rho1] + L1[rho0],      rho1(0) = 0

with, per unit ``dg``,

    L1[rho] = (1/J) (2 (J1- rho J1+ - J2- rho J2+) - {J1+J1- - J2+J2-, rho}).

Everything is represented in the coupled basis ``|(j1, j2) j m>`` with
``j in {jmax, jmax-1, jmax-2}``: starting from the ``jmax`` irrep, ``L1``
contains rank-1 and rank-2 tensors only, so this block set is closed.
All first-order quantities are returned per unit ``dg``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import qnum
from .chip import TwoEnsembleSplit
from .propagator import Sector, propagator
from .qnum import _twice

__all__ = [
    "ToleranceError",
    "PerturbationState",
    "truncated_basis",
    "operators",
    "dicke_state",
    "l1_element",
    "closed_form_l1_jmax",
    "apply_l0",
    "apply_l1",
    "apply_free_propagator",
    "evolve_zeroth",
    "evolve_first",
    "evolve_first_quadrature",
    "jz_zeroth",
    "jz_first",
    "jz_first_closed_form",
]

RTOL = 1e-10
ATOL = 1e-12


class ToleranceError(RuntimeError):
    """Adaptive integrator failed to reach the requested tolerance."""


def truncated_basis(j1, j2) -> list[tuple[int, int]]:
    """Doubled labels ``(2j, 2m)`` for ``j >= jmax - 2``, j and m descending."""
    jmax2 = _twice(j1) + _twice(j2)
    return qnum.coupled_basis(j1, j2, jmin=max(jmax2 - 4, 0) / 2)


@dataclass(frozen=True)
class Operators:
    basis: list
    jm: np.ndarray  # total J-
    jz: np.ndarray
    j1m: np.ndarray
    j2m: np.ndarray
    k1: np.ndarray  # J1+J1-
    k2: np.ndarray  # J2+J2-
    J: float

    @property
    def jpjm(self) -> np.ndarray:
        return self.jm.T @ self.jm

    def slice(self, tj: int) -> np.ndarray:
        return np.array([i for i, (t, _) in enumerate(self.basis) if t == tj])


def operators(j1, j2, method: str = "wigner_eckart") -> Operators:
    basis = truncated_basis(j1, j2)
    n = len(basis)
    jm = np.zeros((n, n))
    for a, (tj, tm) in enumerate(basis):
        for b, (tjp, tmp) in enumerate(basis):
            if tj == tjp and tm == tmp - 2:
                jm[a, b] = qnum.dpm(tjp / 2, tmp / 2, "-")
    jz = np.diag([tm / 2 for _, tm in basis])
    mats = {
        op: qnum.ladder_matrix(j1, j2, op, basis, method)
        for op in ("J1-", "J2-", "J1+J1-", "J2+J2-")
    }
    J = (_twice(j1) + _twice(j2)) / 2 + 0.5
    return Operators(basis, jm, jz, mats["J1-"], mats["J2-"], mats["J1+J1-"], mats["J2+J2-"], J)


def dicke_state(jmax, m=None) -> np.ndarray:
    """Amplitudes of ``|jmax, m>`` over ``m = jmax, jmax-1, ..., -jmax``.

    ``m`` defaults to ``jmax`` (fully excited).
    """
    t = _twice(jmax)
    tm = t if m is None else _twice(m)
    if abs(tm) > t or (t - tm) % 2:
        raise qnum.InvalidQuantumNumber(f"m = {tm / 2} invalid for j = {t / 2}")
    psi = np.zeros(t + 1)
    psi[(t - tm) // 2] = 1.0
    return psi


def _check_psi(psi0, jmax2: int) -> np.ndarray:
    psi0 = np.asarray(psi0)
    if psi0.shape != (jmax2 + 1,):
        raise ValueError(f"psi0 must have {jmax2 + 1} amplitudes over the jmax irrep")
    if abs(np.vdot(psi0, psi0) - 1) > 1e-12:
        raise ValueError("psi0 must be normalized")
    return psi0


# ---------------------------------------------------------------------------
# superoperators


def l1_element(j, l, m, r, jp, lp, mp, rp, j1, j2, J=None, method: str = "wigner_eckart") -> float:
    """Matrix element of ``L1`` mapping ``rho_{lr, l'r'}`` to ``(L1 rho)_{jm, j'm'}``."""
    t1, t2 = _twice(j1), _twice(j2)
    if J is None:
        J = (t1 + t2) / 2 + 0.5
    states = {}
    for name, (a, b) in {"bra": (j, m), "ket": (l, r), "bra_p": (jp, mp), "ket_p": (lp, rp)}.items():
        states[name] = qnum.CoupledState(t1 / 2, t2 / 2, a, b)
    bra, ket, bra_p, ket_p = states["bra"], states["ket"], states["bra_p"], states["ket_p"]
    jmax2 = t1 + t2
    if ket.j.twice > jmax2 or ket_p.j.twice > jmax2:
        raise ValueError("l, l' must not exceed j1 + j2")

    def part(sub: str) -> float:
        lower, square = f"J{sub}-", f"J{sub}+J{sub}-"
        v = 2 * qnum.ladder_element(bra, ket, lower, method) * qnum.ladder_element(
            bra_p, ket_p, lower, method
        )
        if bra.j == ket.j and bra.m == ket.m:
            v -= qnum.ladder_element(ket_p, bra_p, square, method)
        if bra_p.j == ket_p.j and bra_p.m == ket_p.m:
            v -= qnum.ladder_element(bra, ket, square, method)
        return v

    return (part("1") - part("2")) / J


def closed_form_l1_jmax(n, r, j1, jmax) -> float:
    """Diagonal ``jmax`` element ``L(jmax jmax n r; jmax jmax n r)`` in closed form."""
    tn, tr = _twice(n), _twice(r)
    j1f = _twice(j1) / 2
    jm = _twice(jmax) / 2
    nf = tn / 2
    pref = 2 * (2 * j1f - jm) / (jm * (jm + 0.5))
    if tn == tr - 2:
        return pref * (jm + jm * jm - nf - nf * nf)
    if tn == tr:
        return -pref * (jm + jm * jm + nf - nf * nf)
    return 0.0


def apply_l0(ops: Operators, rho: np.ndarray) -> np.ndarray:
    jm = ops.jm
    jpjm = jm.T @ jm
    return (2 * jm @ rho @ jm.T - jpjm @ rho - rho @ jpjm) / (2 * ops.J)


def apply_l1(ops: Operators, rho: np.ndarray) -> np.ndarray:
    kdiff = ops.k1 - ops.k2
    return (
        2 * (ops.j1m @ rho @ ops.j1m.T - ops.j2m @ rho @ ops.j2m.T) - kdiff @ rho - rho @ kdiff
    ) / ops.J


def apply_free_propagator(ops: Operators, rho: np.ndarray, tau: float) -> np.ndarray:
    """``exp(L0 tau)[rho]`` by sector-wise propagators."""
    out = np.zeros_like(rho)
    labels = ops.basis
    # group matrix elements by sector x = (j, j', k)
    groups: dict[tuple, list] = {}
    for a, (tj, tm1) in enumerate(labels):
        for b, (tjp, tm2) in enumerate(labels):
            groups.setdefault((tj, tjp, (tm1 - tm2) // 2), []).append((a, b, (tm1 + tm2) // 2))
    for (tj, tjp, tk), elems in groups.items():
        x = Sector(tj / 2, tjp / 2, tk / 2)
        idx = np.array([x.index(tmc / 2) for _, _, tmc in elems])
        vals = np.zeros(x.size, dtype=rho.dtype)
        rows = np.array([a for a, _, _ in elems])
        cols = np.array([b for _, b, _ in elems])
        vals[idx] = rho[rows, cols]
        out[rows, cols] = (propagator(x, tau, ops.J) @ vals)[idx]
    return out


# ---------------------------------------------------------------------------
# evolution


@dataclass
class PerturbationState:
    """Zeroth and first order density matrices on a tau grid.

    ``rho0`` and ``rho1`` have shape ``(len(tau), dim, dim)`` over
    ``basis`` (doubled ``(2j, 2m)`` labels); ``rho1`` is per unit ``dg``.
    """

    split: TwoEnsembleSplit
    psi0: np.ndarray
    tau: np.ndarray
    basis: list
    rho0: np.ndarray
    rho1: np.ndarray

    def block(self, which: str, j, jp) -> np.ndarray:
        rho = self.rho0 if which == "rho0" else self.rho1
        ia = [i for i, (t, _) in enumerate(self.basis) if t == _twice(j)]
        ib = [i for i, (t, _) in enumerate(self.basis) if t == _twice(jp)]
        return rho[:, ia][:, :, ib]

    def jz(self, which: str = "rho1", j=None) -> np.ndarray:
        rho = self.rho0 if which == "rho0" else self.rho1
        m = np.array([tm / 2 for _, tm in self.basis])
        if j is not None:
            m = np.where([t == _twice(j) for t, _ in self.basis], m, 0.0)
        return np.real(np.einsum("tii,i->t", rho, m))


def _embed(ops: Operators, psi0: np.ndarray) -> np.ndarray:
    jmax2 = ops.basis[0][0]
    full = np.zeros(len(ops.basis), dtype=psi0.dtype)
    full[ops.slice(jmax2)] = psi0
    return full


def evolve_zeroth(psi0, tau, jmax=None) -> np.ndarray:
    """``rho0(tau)`` on the ``jmax`` irrep from the sector propagators.

    ``psi0`` holds amplitudes over ``m = jmax, ..., -jmax``; ``jmax`` defaults
    to ``(len(psi0) - 1)/2``. Returns shape ``(len(tau), d, d)`` for array
    ``tau`` and ``(d, d)`` for scalar ``tau``.
    """
    psi0 = np.asarray(psi0)
    t = len(psi0) - 1 if jmax is None else _twice(jmax)
    psi0 = _check_psi(psi0, t)
    J = t / 2 + 0.5
    basis = [(t, tm) for tm in range(t, -t - 1, -2)]
    ops = Operators(basis, *(np.zeros((t + 1, t + 1)),) * 6, J)
    rho = np.outer(psi0, psi0.conj())
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    out = np.array([apply_free_propagator(ops, rho, s) for s in taus])
    return out if np.ndim(tau) else out[0]


def _prepare(psi0, split: TwoEnsembleSplit, method: str):
    ops = operators(split.j1, split.j2, method)
    psi0 = _check_psi(np.asarray(psi0), ops.basis[0][0])
    return ops, psi0


def evolve_first(psi0, split: TwoEnsembleSplit, tau, method: str = "wigner_eckart") -> PerturbationState:
    """Co-integrate ``(rho0, rho1)`` as one linear ODE on the truncated basis."""
    ops, psi0 = _prepare(psi0, split, method)
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(taus < 0) or np.any(np.diff(taus) < 0):
        raise ValueError("tau grid must be non-negative and non-decreasing")
    full = _embed(ops, psi0)
    n = len(full)
    rho0 = np.outer(full, full.conj())
    dtype = np.result_type(rho0.dtype, float)
    y0 = np.concatenate([rho0.ravel(), np.zeros(n * n, dtype=dtype)])

    def rhs(_, y):
        r0 = y[: n * n].reshape(n, n)
        r1 = y[n * n :].reshape(n, n)
        return np.concatenate([apply_l0(ops, r0).ravel(), (apply_l0(ops, r1) + apply_l1(ops, r0)).ravel()])

    if taus[-1] == 0:
        ys = np.repeat(y0[:, None], len(taus), axis=1)
    else:
        sol = solve_ivp(
            rhs, (0.0, taus[-1]), y0, method="DOP853", t_eval=taus, rtol=RTOL, atol=ATOL
        )
        if not sol.success:
            raise ToleranceError(sol.message)
        ys = sol.y
    r0 = ys[: n * n].T.reshape(-1, n, n)
    r1 = ys[n * n :].T.reshape(-1, n, n)
    return PerturbationState(split, psi0, taus, ops.basis, r0, r1)


def _l1_superoperator(ops: Operators, j1, j2, method: str) -> dict:
    # sparse table {(a, b): [(c, d, value), ...]} for sources c, d in jmax
    jmax2 = ops.basis[0][0]
    src = [i for i, (t, _) in enumerate(ops.basis) if t == jmax2]
    table = {}
    for a, (tj, tm) in enumerate(ops.basis):
        for b, (tjp, tmp) in enumerate(ops.basis):
            entries = []
            for c in src:
                tl, tr = ops.basis[c]
                if abs(tm - tr) > 2:
                    continue
                for d in src:
                    tlp, trp = ops.basis[d]
                    if (tm - tr) != (tmp - trp):
                        continue
                    v = l1_element(tj / 2, tl / 2, tm / 2, tr / 2, tjp / 2, tlp / 2, tmp / 2, trp / 2, j1, j2, ops.J, method)
                    if v != 0.0:
                        entries.append((c, d, v))
            if entries:
                table[(a, b)] = entries
    return table


def evolve_first_quadrature(psi0, split: TwoEnsembleSplit, tau: float, n_nodes: int = 80, method: str = "decouple") -> np.ndarray:
    """``rho1(tau)`` from the double-propagator time integral (reference route).

    ``rho1 = int_0^tau exp(L0 (tau - s)) L1 exp(L0 s) rho(0) ds`` with
    ``L1`` assembled element by element and Gauss-Legendre quadrature.
    Intended for small systems.
    """
    ops, psi0 = _prepare(psi0, split, method)
    full = _embed(ops, psi0)
    rho_init = np.outer(full, full.conj())
    table = _l1_superoperator(ops, split.j1, split.j2, method)
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    s_vals = 0.5 * tau * (nodes + 1)
    w_vals = 0.5 * tau * weights
    out = np.zeros_like(rho_init, dtype=np.result_type(rho_init.dtype, float))
    for s, w in zip(s_vals, w_vals):
        r0 = apply_free_propagator(ops, rho_init, s)
        src = np.zeros_like(out)
        for (a, b), entries in table.items():
            src[a, b] = sum(v * r0[c, d] for c, d, v in entries)
        out += w * apply_free_propagator(ops, src, tau - s)
    return out


def jz_zeroth(psi0, tau) -> np.ndarray:
    """``<J_z>`` of the homogeneous evolution."""
    psi0 = np.asarray(psi0)
    t = len(psi0) - 1
    rho = evolve_zeroth(psi0, np.atleast_1d(tau))
    m = np.arange(t, -t - 1, -2) / 2
    out = np.real(np.einsum("tii,i->t", rho, m))
    return out if np.ndim(tau) else out[0]


def jz_first(psi0, split: TwoEnsembleSplit, tau) -> np.ndarray:
    """First-order correction ``<J_z,1>(tau) / dg``."""
    state = evolve_first(psi0, split, np.atleast_1d(tau))
    out = state.jz("rho1")
    return out if np.ndim(tau) else out[0]


def jz_first_closed_form(split: TwoEnsembleSplit, tau, n_nodes: int = 80) -> np.ndarray:
    """``<J_z,1>/dg`` for the fully excited start from the explicit jmax formula.

    Only the ``jmax`` diagonal block contributes; the time integral over
    the two probability propagators is done by Gauss-Legendre quadrature.
    """
    jmax = split.jmax
    J = jmax + 0.5
    x = Sector(jmax, jmax, 0)
    m = x.m_values
    top = x.size - 1
    n = m
    c_up = jmax + jmax**2 - n - n**2
    c_diag = jmax + jmax**2 + n - n**2
    pref = 2 * (2 * split.j1 - jmax) / (jmax * J)
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    out = []
    for t in np.atleast_1d(tau):
        total = 0.0
        for s, w in zip(0.5 * t * (nodes + 1), 0.5 * t * weights):
            Ds = propagator(x, s, J)[:, top]
            src = -c_diag * Ds
            src[:-1] += c_up[:-1] * Ds[1:]
            total += w * (m @ (propagator(x, t - s, J) @ src))
        out.append(pref * total)
    out = np.array(out)
    return out if np.ndim(tau) else out[0]
