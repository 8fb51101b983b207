import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from srlab import constants as C
from srlab.chip import (
    CircuitSpec,
    DegenerateDistribution,
    LoopGeometry,
    Moments,
    SingularPointError,
    TrapSpec,
    TwoEnsembleSplit,
    coupling,
    coupling_distribution,
    coupling_scale,
    match_two_ensembles,
    mode_function,
    regime_check,
    sample_moments,
    sample_positions,
    segment_field,
    thermal_length,
    two_point_moments,
    two_point_parameters,
)

D = 10e-6
CIRCUIT = CircuitSpec(inductance=1e-12, omega=2 * math.pi * 6.834e9, d=D, quality=1000)
LOOP = LoopGeometry.square(D)


def bz_axis_square(z, a):
    """On-axis field of a square loop of side ``a`` at height ``z``, units mu0 I/(4 pi)."""
    r2 = z * z + a * a / 4
    return 2 * a * a / (r2 * math.sqrt(z * z + a * a / 2))


def biot_savart_quad(x, a, b):
    """Numerical line integral of dl x r / |r|^3 along a -> b."""
    a, b, x = map(np.asarray, (a, b, x))
    dl = b - a

    def integrand(t, comp):
        r = x - (a + t * dl)
        return np.cross(dl, r)[comp] / np.linalg.norm(r) ** 3

    return np.array([quad(integrand, 0, 1, args=(k,), epsabs=1e-14, epsrel=1e-12)[0] for k in range(3)])


def test_segment_field_matches_line_integral():
    rng = np.random.default_rng(3)
    for _ in range(10):
        a = rng.normal(size=3)
        b = rng.normal(size=3)
        x = rng.normal(size=3) * 2
        assert np.allclose(segment_field(x, a, b), biot_savart_quad(x, a, b), rtol=1e-9, atol=1e-12)


def test_mode_function_center_value():
    # b_z(d/2, d/2, d/2) = 8 / sqrt(3) for a square of side d
    b = mode_function([D / 2, D / 2, D / 2], LOOP, D)
    assert b[2] == pytest.approx(8 / math.sqrt(3), rel=1e-12)
    assert abs(b[0]) < 1e-12 and abs(b[1]) < 1e-12


@pytest.mark.parametrize("z", [2e-6, 4e-6, 5e-6, 6e-6, 15e-6])
def test_mode_function_on_axis_closed_form(z):
    b = mode_function([D / 2, D / 2, z], LOOP, D)
    assert b[2] == pytest.approx(D * bz_axis_square(z, D), rel=1e-12)


def test_coupling_absolute_and_ratios():
    G = C.MU_B * C.MU_0 / (4 * math.pi * D) * math.sqrt(CIRCUIT.omega / (2 * C.HBAR * 1e-12))
    assert coupling_scale(CIRCUIT) == pytest.approx(G, rel=1e-14)
    g = {z: coupling([D / 2, D / 2, z * 1e-6], CIRCUIT) / (2 * math.pi) for z in (4, 5, 6)}
    assert abs(g[5]) == pytest.approx(973, abs=1.0)
    assert g[5] < 0  # b_z > 0 above the loop, g = -G b_z
    assert g[4] / g[5] == pytest.approx(1.299, abs=0.005)
    assert g[6] / g[5] == pytest.approx(0.765, abs=0.005)


def test_orientation_flips_sign():
    rev = LoopGeometry.square(D, orientation=-1)
    x = [3e-6, 4e-6, 5e-6]
    assert np.allclose(mode_function(x, rev, D), -mode_function(x, LOOP, D))


def test_mirror_symmetry():
    xs = np.linspace(1e-6, 9e-6, 9)
    pts = np.stack([xs, np.full_like(xs, D / 2), np.full_like(xs, 5e-6)], axis=-1)
    mirrored = pts.copy()
    mirrored[:, 0] = D - xs
    assert np.allclose(coupling(pts, CIRCUIT), coupling(mirrored, CIRCUIT), rtol=1e-12)


def test_field_far_away_is_dipole():
    # |b_z| on axis at z >> d falls as 2 d^3 / z^3 (dipole of area d^2)
    z = 1e-3
    b = mode_function([D / 2, D / 2, z], LOOP, D)[2]
    assert b == pytest.approx(2 * D**3 / z**3, rel=1e-3)


def test_singular_point_on_wire():
    with pytest.raises(SingularPointError):
        mode_function([D / 2, 0.0, 0.0], LOOP, D)


def test_loop_validation():
    with pytest.raises(ValueError):
        LoopGeometry(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        LoopGeometry(np.array([[0, 0, 1.0], [1, 0, 0], [1, 1, 0]]))
    with pytest.raises(ValueError):
        LoopGeometry.square(D, orientation=2)


def test_circuit_kappa_quality():
    c = CircuitSpec(1e-12, 2 * math.pi * 1e9, D, kappa=2 * math.pi * 1e6)
    assert c.quality == pytest.approx(1000)
    with pytest.raises(ValueError):
        CircuitSpec(1e-12, 1e9, D, kappa=1e6, quality=10)
    with pytest.raises(ValueError):
        CircuitSpec(-1, 1e9, D)


def test_thermal_length_limits():
    w = 2 * math.pi * 1e3
    hot = TrapSpec((w, w, w), (0, 0, 0), temperature=1e-3)
    l_hot = thermal_length(hot)[0]
    assert l_hot == pytest.approx(math.sqrt(2 * C.K_B * 1e-3 / (C.M_RB87 * w * w)), rel=1e-6)
    cold = TrapSpec((w, w, w), (0, 0, 0), temperature=1e-12)
    assert thermal_length(cold)[0] == pytest.approx(math.sqrt(C.HBAR / (C.M_RB87 * w)), rel=1e-9)


def test_sample_positions_width_and_seed():
    w = 2 * math.pi * 1e3
    trap = TrapSpec((w, 2 * w, 3 * w), (1e-6, 2e-6, 3e-6), temperature=1e-6)
    x = sample_positions(trap, 200_000, seed=11)
    std = x.std(axis=0)
    expect = thermal_length(trap) / math.sqrt(2)
    assert np.allclose(std, expect, rtol=0.01)
    assert np.allclose(x.mean(axis=0), trap.center, atol=3 * expect.max() / math.sqrt(2e5))
    assert np.array_equal(x, sample_positions(trap, 200_000, seed=11))


def _trap(T, f=1e3):
    w = 2 * math.pi * f
    return TrapSpec((w, w, w), (D / 2, D / 2, D), temperature=T)


def test_distribution_normalized_and_wide():
    h = coupling_distribution(_trap(1e-7), CIRCUIT, LOOP, n_samples=100_000, seed=1, bins=60)
    assert h.integral() == pytest.approx(1.0, abs=1e-12)
    mean_abs = abs(h.g_over_G.mean())
    assert (h.g_over_G.max() - h.g_over_G.min()) >= 0.5 * mean_abs


def test_distribution_shrinks_toward_zero_with_temperature():
    med = []
    for T in (1e-7, 1e-6, 1e-5):
        h = coupling_distribution(_trap(T), CIRCUIT, LOOP, n_samples=50_000, seed=5, bins=50)
        med.append(abs(np.median(h.g_over_G)))
    assert med[0] > med[1] > med[2]
    assert med[2] < 0.5 * med[0]


def test_distribution_stiff_trap_is_narrow():
    h = coupling_distribution(_trap(1e-9, f=1e8), CIRCUIT, LOOP, n_samples=10_000, seed=2, bins=1)
    g0 = -mode_function([D / 2, D / 2, D], LOOP, D)[2]
    assert np.abs(h.g_over_G - g0).max() < 1e-3 * abs(g0)


def test_two_point_round_trip_example():
    m = two_point_moments(3, 5, 2.0, 1.0)
    s = match_two_ensembles(m, 8)
    assert (s.n1, s.n2) == (3, 5)
    assert s.g1 == pytest.approx(2.0, rel=1e-12)
    assert s.g2 == pytest.approx(1.0, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    n1=st.integers(1, 99),
    n2=st.integers(1, 99),
    g1=st.floats(-5, 5, allow_nan=False),
    g2=st.floats(-5, 5, allow_nan=False),
)
def test_property_round_trip(n1, n2, g1, g2):
    if abs(g1 - g2) < 1e-3 * max(1.0, abs(g1), abs(g2)):
        return
    s = match_two_ensembles(two_point_moments(n1, n2, g1, g2), n1 + n2)
    if g1 < g2:  # larger coupling is returned as subensemble 1
        n1, n2, g1, g2 = n2, n1, g2, g1
    assert (s.n1, s.n2) == (n1, n2)
    scale = max(abs(g1), abs(g2))
    assert abs(s.g1 - g1) <= 1e-9 * scale
    assert abs(s.g2 - g2) <= 1e-9 * scale


def test_closed_form_roots_at_zero_mean():
    rng = np.random.default_rng(0)
    for _ in range(50):
        s2 = rng.uniform(0.1, 3)
        s3 = rng.normal()
        n = 40
        root = math.sqrt(4 * s2**3 + s3**2)
        g_plus = (s3 + root) / (2 * s2)
        g_minus = (s3 - root) / (2 * s2)
        diff_closed = n * s3 / root
        p1, g1, g2 = two_point_parameters(Moments(0.0, s2, s3))
        assert g1 == pytest.approx(g_plus, rel=1e-12)
        assert g2 == pytest.approx(g_minus, rel=1e-12)
        # the closed-form N1 - N2 counts atoms at the lower root first
        assert n * (2 * p1 - 1) == pytest.approx(-diff_closed, abs=1e-9)


def test_degenerate_moments_warn():
    with pytest.warns(DegenerateDistribution):
        s = match_two_ensembles(Moments(1.0, 0.0, 0.0), 4)
    assert (s.n1, s.n2, s.g1) == (4, 0, 1.0)


def test_sample_moments():
    g = np.array([1.0, 1.0, 4.0])
    m = sample_moments(g)
    assert m.mean_g == pytest.approx(2.0)
    assert m.var_g == pytest.approx(2.0)
    assert m.skew_g == pytest.approx((-1 - 1 + 8) / 3)


def test_split_fields():
    s = TwoEnsembleSplit.from_dg(4, 2, 0.25, g_ref=2.0)
    assert (s.g1, s.g2) == (2.5, 1.5)
    assert s.dg_tilde == pytest.approx(0.25)
    assert (s.j1, s.j2, s.jmax) == (2.0, 1.0, 3.0)
    with pytest.raises(ValueError):
        TwoEnsembleSplit(0, 0, 1, 1)


def test_regime_check_numbers():
    circuit = CircuitSpec(1e-12, 2 * math.pi * 6.834e9, D, kappa=2 * math.pi * 1e6)
    rep = regime_check(circuit, _trap(1e-6), n_atoms=1000, g_typ=2 * math.pi * 400)
    assert rep.n_upper == pytest.approx((1e6 / 400) ** 2)
    v = math.sqrt(C.K_B * 1e-6 / C.M_RB87)
    gamma = (2 * math.pi * 400) ** 2 / circuit.kappa
    assert rep.n_lower == pytest.approx(v / (gamma * D))
    assert rep.t_max == pytest.approx(C.M_RB87 * (circuit.kappa * D) ** 2 / C.K_B)
    names = [it.name for it in rep.items]
    assert names[:3] == ["superradiance", "frozen-motion", "temperature"]
    classical = [it for it in rep.items if it.name.startswith("classical")]
    assert all(it.passed for it in classical)
    assert classical[0].ratio == pytest.approx(0.024, abs=0.001)
    assert len(rep.lines()) == 3 + len(rep.items)


def test_regime_check_needs_kappa():
    c = CircuitSpec(1e-12, 1e9, D)
    with pytest.raises(ValueError):
        regime_check(c, _trap(1e-6), 10, 1.0)
