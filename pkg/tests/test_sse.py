import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from srlab.chip import TwoEnsembleSplit
from srlab.qnum import dpm
from srlab.sse import (
    NumericalFailure,
    RankAmbiguous,
    SseConfig,
    build_collective_lowering,
    dark_space,
    ensemble_stats,
    excited_state,
    expectation_jz,
    full_space_lowering,
    lindblad_jz,
    lindblad_reference,
    product_operators,
    rotated_singlet,
    run_batch,
    run_trajectory,
    sse_step,
)


def split(n1, n2, dg):
    return TwoEnsembleSplit.from_dg(n1, n2, dg)


def lowering_oracle(j):
    """Single-spin J- with m descending, built element by element."""
    n = int(round(2 * j)) + 1
    out = np.zeros((n, n))
    for i in range(n - 1):
        m = j - i
        out[i + 1, i] = dpm(j, m, "-")
    return out


def exact_null_dim(A) -> int:
    M = sympy.Matrix(np.rint(A).astype(int))
    return M.shape[1] - M.rank()


# ---------------------------------------------------------------------------
# operators


def test_homogeneous_limit_is_total_lowering():
    for n1, n2 in [(1, 1), (2, 1), (3, 2)]:
        L = build_collective_lowering(split(n1, n2, 0.0)).toarray()
        a, b = lowering_oracle(n1 / 2), lowering_oracle(n2 / 2)
        expect = np.kron(a, np.eye(n2 + 1)) + np.kron(np.eye(n1 + 1), b)
        assert np.allclose(L, expect, atol=1e-14)


def test_one_sided_limit():
    L = build_collective_lowering(split(2, 3, 1.0)).toarray()
    expect = 2 * np.kron(lowering_oracle(1), np.eye(4))
    assert np.allclose(L, expect, atol=1e-14)


def test_product_jz_and_excited_state():
    ops = product_operators(split(2, 1, 0.3))
    psi = excited_state(split(2, 1, 0.3))
    assert psi[0] == 1.0 and np.count_nonzero(psi) == 1
    assert expectation_jz(psi, ops) == pytest.approx(1.5)
    assert ops.jmax == 1.5 and ops.dim == 6


@pytest.mark.parametrize("dg", [0.0, 0.2, 0.5, -0.7])
def test_rotated_singlet_is_in_kernel(dg):
    L = build_collective_lowering(split(1, 1, dg))
    ker = dark_space(L)
    v = rotated_singlet(dg)
    fidelity = np.linalg.norm(ker.conj().T @ v) ** 2
    assert fidelity >= 1 - 1e-10
    assert np.abs(L @ v).max() < 1e-14


def test_two_spin_kernel_dimension():
    assert dark_space(build_collective_lowering(split(1, 1, 0.5))).shape[1] == 2
    assert dark_space(full_space_lowering([1.0, 1.0])).shape[1] == 2


def test_kernel_is_orthonormal():
    ker = dark_space(build_collective_lowering(split(3, 2, 0.4)))
    assert np.allclose(ker.conj().T @ ker, np.eye(ker.shape[1]), atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_full_space_kernel_count(n):
    A = full_space_lowering(np.ones(n)).toarray()
    expect = math.comb(n, n // 2)
    assert exact_null_dim(A) == expect
    assert dark_space(A).shape[1] == expect


def test_symmetric_product_kernel_n4():
    # j1 = j2 = 1: lowest-weight states of j = 2, 1, 0
    A = build_collective_lowering(split(2, 2, 0.0)).toarray()
    M = sympy.Matrix(A).applyfunc(sympy.nsimplify)
    assert 9 - M.rank() == 3
    assert dark_space(A).shape[1] == 3


def test_full_space_lowering_ordering():
    # spin 0 most significant; bit 0 excited
    L = full_space_lowering([2.0, 3.0]).toarray()
    assert L[0b10, 0b00] == 2.0
    assert L[0b01, 0b00] == 3.0
    assert L[0b11, 0b01] == 2.0
    assert L[0b11, 0b10] == 3.0


def test_rank_ambiguous():
    with pytest.raises(RankAmbiguous):
        dark_space(np.diag([1.0, 1e-10]))
    assert dark_space(np.diag([1.0, 1e-14])).shape[1] == 1


# ---------------------------------------------------------------------------
# stepping


def test_dark_state_step_stationary():
    dg = 0.5
    op = product_operators(split(1, 1, dg))
    v = rotated_singlet(dg)
    for dW in (0.0, 0.3, -1.2):
        assert np.allclose(sse_step(v, 1e-3, dW, op), v, atol=1e-15)


def test_ground_state_stationary():
    op = product_operators(split(2, 1, 0.3))
    g = np.zeros(op.dim)
    g[-1] = 1.0
    assert np.array_equal(sse_step(g, 1e-2, 0.7, op), g)


def test_norm_after_step():
    op = product_operators(split(3, 2, 0.4))
    rng = np.random.default_rng(4)
    psi = rng.normal(size=(20, op.dim)) + 1j * rng.normal(size=(20, op.dim))
    psi /= np.linalg.norm(psi, axis=1, keepdims=True)
    out = sse_step(psi, 1e-3, rng.normal(size=20) * 0.03, op)
    assert np.allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-14)


def test_pre_renormalization_drift_order():
    op = product_operators(split(3, 3, 0.5))
    rng = np.random.default_rng(1)
    psi = rng.normal(size=op.dim)
    psi /= np.linalg.norm(psi)
    drift = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        dW = np.array([1.0, -1.0]) * math.sqrt(dt)
        out = sse_step(np.tile(psi, (2, 1)), dt, dW, op, renormalize=False)
        drift.append(np.abs(np.linalg.norm(out, axis=1) ** 2 - 1).max())
    for a, b in zip(drift, drift[1:]):
        assert a / b >= 0.9 * 2**1.5


def test_step_rejects_bad_noise():
    op = product_operators(split(1, 1, 0.0))
    with pytest.raises(ValueError):
        sse_step(excited_state(split(1, 1, 0.0)), 1e-3, np.nan, op)
    with pytest.raises(ValueError):
        sse_step(excited_state(split(1, 1, 0.0)), 1e-3, 0.1, op.lower)


def test_step_matches_hand_update():
    op = product_operators(split(1, 0, 0.0))  # a single two-level emitter, J = 1
    psi = np.array([0.6, 0.8])
    L = np.array([[0.0, 0.0], [1.0, 0.0]])
    ell = psi @ L @ psi
    d1 = (2 * ell * L @ psi - L.T @ L @ psi - ell**2 * psi) / 2
    d2 = L @ psi - ell * psi
    raw = psi + d1 * 0.01 + d2 * 0.05
    assert np.allclose(sse_step(psi, 0.01, 0.05, op), raw / np.linalg.norm(raw))


# ---------------------------------------------------------------------------
# trajectories


def test_config_validation():
    s = split(1, 1, 0.0)
    with pytest.raises(ValueError):
        SseConfig(s, d_tau=0)
    with pytest.raises(ValueError):
        SseConfig(s, n_traj=0)
    with pytest.raises(ValueError):
        SseConfig(s, tau_max=1.0, record_grid=(0.5, 2.0))
    c = SseConfig(s, d_tau=0.01, tau_max=1.0, record_grid=(0, 0.5, 1.0))
    assert c.n_steps == 100
    assert list(c.record_steps()) == [0, 50, 100]


def test_seed_determinism_and_independence_of_batching():
    c = SseConfig(split(2, 1, 0.4), d_tau=5e-3, tau_max=1.0, n_traj=23, seed=99, record_grid=(0, 0.5, 1.0))
    a = ensemble_stats(c, batch_size=23)
    b = ensemble_stats(c, batch_size=5, threads=3)
    assert np.array_equal(a.final, b.final)
    assert np.array_equal(a.grid_mean, b.grid_mean)
    one = run_trajectory(c, 7)
    assert one.final_jz_over_j == a.final[7]
    assert np.array_equal(one.jz_over_j, run_batch(c, [3, 7])[1, :-1])
    other = ensemble_stats(SseConfig(**{**c.__dict__, "seed": 100}), batch_size=23)
    assert not np.array_equal(a.final, other.final)


def test_complex_path_matches_real_path():
    c = SseConfig(split(2, 2, 0.5), d_tau=5e-3, tau_max=1.0, n_traj=8, seed=3, record_grid=(0.5, 1.0))
    psi = excited_state(c.split)
    real = run_batch(c, range(8), psi)
    cplx = run_batch(c, range(8), psi.astype(complex) * np.exp(0.3j))
    assert np.abs(real - cplx).max() < 1e-12


def test_records_bounded():
    c = SseConfig(split(3, 1, 0.6), d_tau=5e-3, tau_max=2.0, n_traj=40, seed=1, record_grid=(0, 1, 2))
    data = run_batch(c, range(40))
    assert np.all(data <= 1 + 1e-12) and np.all(data >= -1 - 1e-12)
    assert np.allclose(data[:, 0], 1.0)


def test_dark_trajectory_stationary():
    dg = 0.5
    c = SseConfig(split(1, 1, dg), d_tau=1e-3, tau_max=5.0, n_traj=5, seed=2, record_grid=(0, 1, 2, 3, 4, 5))
    data = run_batch(c, range(5), rotated_singlet(dg))
    assert np.abs(data).max() < 1e-9


def test_dark_component_trapped():
    # |eg> = (triplet + singlet)/sqrt2: the singlet half never decays, so
    # trajectories stay between the singlet (0) and the ground state (-1)
    c = SseConfig(split(1, 1, 0.0), d_tau=2e-3, tau_max=8.0, n_traj=400, seed=5, record_grid=())
    psi = np.array([0.0, 1.0, 0.0, 0.0])
    s = ensemble_stats(c, psi0=psi)
    assert np.all(s.final <= 1e-6) and np.all(s.final >= -1 - 1e-12)
    exact = lindblad_jz(c.split, 8.0, rho0=psi)
    assert exact == pytest.approx(-0.5, abs=1e-3)
    assert abs(s.mean - exact) <= 3 * s.stderr


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nan_detection(monkeypatch):
    import srlab.sse as mod

    c = SseConfig(split(1, 1, 0.0), d_tau=1e-3, tau_max=0.01, n_traj=1, seed=0, record_grid=())
    monkeypatch.setattr(mod, "_noise", lambda config, i: np.full(config.n_steps, np.inf))
    with pytest.raises(NumericalFailure):
        run_batch(c, [0])


def test_one_sided_endpoint_small():
    c = SseConfig(split(2, 1, 1.0), d_tau=2e-3, tau_max=5.0, n_traj=200, seed=11, record_grid=())
    s = ensemble_stats(c)
    assert s.mean == pytest.approx(-1 / 3, abs=0.02)


def test_small_ensemble_vs_lindblad():
    grid = (0.5, 1.0, 2.0)
    c = SseConfig(split(2, 1, 0.5), d_tau=2e-3, tau_max=2.0, n_traj=2000, seed=21, record_grid=grid)
    s = ensemble_stats(c)
    exact = lindblad_jz(c.split, np.array(grid)) / c.split.jmax
    assert np.all(np.abs(s.grid_mean - exact) <= 3 * s.grid_stderr)


def test_histogram_fields():
    c = SseConfig(split(1, 1, 0.0), d_tau=5e-3, tau_max=1.0, n_traj=30, seed=0, record_grid=())
    s = ensemble_stats(c, bins=10)
    assert s.counts.sum() == 30 and len(s.edges) == 11
    assert s.stderr == pytest.approx(s.std / math.sqrt(30))


# ---------------------------------------------------------------------------
# Lindblad oracle


def test_lindblad_single_emitter():
    tau = np.linspace(0, 5, 11)
    assert np.allclose(lindblad_jz(split(1, 0, 0.0), tau), np.exp(-tau) - 0.5, atol=1e-10)


def test_lindblad_trace_and_hermiticity():
    rho = lindblad_reference(excited_state(split(3, 2, 0.5)), split(3, 2, 0.5), np.linspace(0, 5, 6))
    for r in rho:
        assert np.trace(r) == pytest.approx(1.0, abs=1e-10)
        assert np.allclose(r, r.conj().T, atol=1e-12)
        assert np.linalg.eigvalsh(r).min() > -1e-10


def test_lindblad_inversion_rate_nonpositive():
    sp_ = split(3, 2, 0.5)
    ops = product_operators(sp_)
    L = ops.lower.toarray()
    tau = np.linspace(0, 5, 21)
    rho = lindblad_reference(excited_state(sp_), sp_, tau)
    rate = -np.real(np.einsum("ij,tji->t", L.T @ L, rho)) / ops.J
    assert np.all(rate <= 1e-12)
    h = 1e-5
    for t, r in zip(tau[1:-1:4], rate[1:-1:4]):
        fd = (lindblad_jz(sp_, t + h) - lindblad_jz(sp_, t - h)) / (2 * h)
        assert fd == pytest.approx(r, abs=1e-6)


def test_lindblad_grid_order_and_size_limit():
    sp_ = split(2, 1, 0.2)
    fwd = lindblad_jz(sp_, np.array([0.5, 1.0]))
    back = lindblad_jz(sp_, np.array([1.0, 0.5]))
    assert np.allclose(fwd, back[::-1], atol=1e-12)
    with pytest.raises(ValueError):
        lindblad_reference(excited_state(split(8, 8, 0.0)), split(8, 8, 0.0), 1.0)


@settings(max_examples=20, deadline=None)
@given(dg=st.floats(-1, 1), n1=st.integers(1, 3), n2=st.integers(1, 3))
def test_property_ground_state_is_dark(dg, n1, n2):
    op = build_collective_lowering(split(n1, n2, dg))
    g = np.zeros(op.shape[0])
    g[-1] = 1
    assert np.abs(op @ g).max() == 0


@pytest.mark.slow
def test_step_halving_convergence(monkeypatch):
    # coarse increments are sums of consecutive fine ones: both runs follow
    # the same Brownian paths, so the gap is discretization error alone
    import srlab.sse as mod

    fine = SseConfig(split(3, 3, 0.5), d_tau=1e-3, tau_max=1.0, n_traj=10_000, seed=8, record_grid=(1.0,))
    coarse = SseConfig(split(3, 3, 0.5), d_tau=2e-3, tau_max=1.0, n_traj=10_000, seed=8, record_grid=(1.0,))
    f = ensemble_stats(fine)
    real_noise = mod._noise
    monkeypatch.setattr(mod, "_noise", lambda cfg, i: real_noise(fine, i).reshape(-1, 2).sum(axis=1))
    c = ensemble_stats(coarse)
    assert abs(f.grid_mean[0] - c.grid_mean[0]) < f.grid_stderr[0]
    exact = lindblad_jz(fine.split, 1.0) / 3
    assert abs(f.grid_mean[0] - exact) <= 3 * f.grid_stderr[0]
