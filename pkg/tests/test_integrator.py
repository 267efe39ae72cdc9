import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paraosc.integrator import (
    CoupledCoefficients,
    IntegrationError,
    IntegratorConfig,
    OscState,
    propagate_coupled,
    propagate_scalar,
    solve,
    unpack_nodes,
    wronskian,
)
from paraosc.scenario import DriveParameters, Mode, mode_frequency_squared


def const(value):
    return lambda t: value


def test_cosine_solution():
    traj = propagate_scalar(const(1.0), OscState(1, 0, 0.0), math.pi)
    assert traj[-1].t == math.pi
    assert abs(traj[-1].b - (-1)) < 1e-9


def test_growing_exponential():
    traj = propagate_scalar(const(-1.0), OscState(1, 1, 0.0), 1.0)
    assert abs(traj[-1].b - math.e) < 1e-8


def test_sine_with_frequency_two():
    traj = propagate_scalar(const(4.0), OscState(0, 2, 0.0), math.pi / 4)
    assert abs(traj[-1].b - 1.0) < 1e-9


def test_lands_on_requested_times():
    times = np.linspace(0, 3, 13)
    traj = propagate_scalar(const(1.0), OscState(1, 0, 0.0), 3.0, t_eval=times)
    np.testing.assert_array_equal(traj.t, times)
    np.testing.assert_allclose(traj.b.real, np.cos(times), atol=1e-9)


def test_dense_output_between_nodes():
    traj = propagate_scalar(const(1.0), OscState(1, 0, 0.0), 5.0)
    for t in (0.123, 1.77, 4.5):
        s = traj.at(t)
        assert abs(s.b - math.cos(t)) < 1e-6
        assert abs(s.bdot + math.sin(t)) < 1e-6


def _rk4_sup_error(h):
    cfg = IntegratorConfig.fixed(h)
    traj = propagate_scalar(const(1.0), OscState(1, 0, 0.0), 2 * math.pi, cfg)
    return np.max(np.abs(traj.b - np.cos(traj.t)))


def test_rk4_fourth_order():
    ratio = _rk4_sup_error(math.pi / 32) / _rk4_sup_error(math.pi / 64)
    assert 12 <= ratio <= 20


def test_rk4_uses_uniform_steps():
    traj = propagate_scalar(const(1.0), OscState(1, 0, 0.0), 1.0, IntegratorConfig.fixed(0.3))
    steps = np.diff(traj.t)
    np.testing.assert_allclose(steps, 0.25)


def test_rk4_is_deterministic():
    cfg = IntegratorConfig.fixed(0.01)
    f = lambda t: 0.12 + 0.08 * math.cos(t)
    a = propagate_scalar(f, OscState(1j, -0.3, 0.0), 10.0, cfg)
    b = propagate_scalar(f, OscState(1j, -0.3, 0.0), 10.0, cfg)
    np.testing.assert_array_equal(a.b, b.b)


@pytest.mark.parametrize("mode", list(Mode))
def test_wronskian_drift_over_hundred_periods(mode):
    p = DriveParameters(g=0.4, delta_g=0.04)
    seed = OscState(1j / math.sqrt(2 * 0.5), -math.sqrt(0.25), 0.0)
    traj = propagate_scalar(lambda t: mode_frequency_squared(p, mode, t), seed, 100 * p.period)
    w = wronskian(traj.b, traj.bdot)
    assert np.max(np.abs(w - w[0])) <= 1e-8


@settings(max_examples=15, deadline=None)
@given(
    st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
    st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
    st.floats(-0.5, 2.0),
)
def test_linearity(c1, c2, a):
    f = lambda t: a + 0.3 * math.cos(2 * t)
    s1, s2 = OscState(1, 0, 0.0), OscState(0, 1, 0.0)
    times = np.linspace(0, 5, 6)
    t1 = propagate_scalar(f, s1, 5.0, t_eval=times)
    t2 = propagate_scalar(f, s2, 5.0, t_eval=times)
    combo = propagate_scalar(f, OscState(c1 * s1.b + c2 * s2.b, c1 * s1.bdot + c2 * s2.bdot, 0.0), 5.0,
                             t_eval=times)
    scale = max(1.0, np.max(np.abs(combo.b)))
    assert np.max(np.abs(combo.b - (c1 * t1.b + c2 * t2.b))) <= 1e-9 * scale


def test_nonfinite_rhs_raises():
    with pytest.raises(IntegrationError) as info:
        propagate_scalar(lambda t: float("nan") if t > 0.5 else 1.0, OscState(1, 0, 0.0), 1.0)
    assert info.value.t > 0


def test_backwards_interval_rejected():
    with pytest.raises(ValueError):
        propagate_scalar(const(1.0), OscState(1, 0, 1.0), 0.5)


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0)
    with pytest.raises(ValueError):
        IntegratorConfig(method="euler")
    with pytest.raises(ValueError):
        IntegratorConfig.fixed(-0.1)


def test_generic_solve_on_vector_state():
    sol = solve(lambda t, y: -y, 0.0, np.array([1.0, 2.0]), 1.0, IntegratorConfig())
    np.testing.assert_allclose(sol.y_eval[-1], np.exp(-1) * np.array([1.0, 2.0]), atol=1e-10)


def _unit_coupled(nu2, gamma):
    return CoupledCoefficients(const(1.0), const(1.0), const(1.0), const(nu2), gamma)


def test_decoupled_rows():
    B0 = np.array([[1, 0], [0, 1]], dtype=complex)
    Bd0 = np.zeros((2, 2), dtype=complex)
    sol = propagate_coupled(_unit_coupled(4.0, const(0.0)), B0, Bd0, 0.0, math.pi)
    B, _ = unpack_nodes(sol.y_eval)
    assert abs(B[-1][0, 0] + 1) < 1e-8
    assert abs(B[-1][1, 1] - 1) < 1e-8
    assert abs(B[-1][0, 1]) == 0


def test_coupled_normal_mode_frequencies_from_spectrum():
    g = 0.4
    coeffs = CoupledCoefficients(const(1.0), const(1.0), const(1.0), const(1.0), const(g))
    B0 = np.array([[1, 0], [0, 0]], dtype=complex)
    Bd0 = np.zeros((2, 2), dtype=complex)
    n, T = 4096, 400.0
    times = np.linspace(0, T, n, endpoint=False)
    sol = propagate_coupled(coeffs, B0, Bd0, 0.0, T, t_eval=times)
    B, _ = unpack_nodes(sol.y_eval)
    signal = B[:, 0, 0].real
    power = np.abs(np.fft.rfft(signal * np.hanning(n)))
    freqs = 2 * math.pi * np.fft.rfftfreq(n, d=T / n)
    bin_width = freqs[1]
    peaks = [i for i in range(1, len(power) - 1) if power[i] > power[i - 1] and power[i] > power[i + 1]]
    top = sorted(sorted(peaks, key=lambda i: power[i])[-2:])
    expected = [math.sqrt(1 - g), math.sqrt(1 + g)]
    for i, w in zip(top, expected):
        assert abs(freqs[i] - w) <= bin_width


@settings(max_examples=8, deadline=None)
@given(
    st.floats(0.5, 2.0), st.floats(0.0, 0.4), st.floats(0.5, 2.0), st.floats(0.0, 0.4),
    st.floats(0.5, 1.5), st.floats(0.5, 1.5), st.floats(0.0, 0.3), st.floats(0.3, 2.0),
)
def test_coupled_wronskian_matrix_conserved_for_random_coefficients(m1, am1, n1, an1, n2, m2, gam, freq):
    mu1 = lambda t: m1 * (1 + am1 * math.sin(freq * t))
    mu1d = lambda t: m1 * am1 * freq * math.cos(freq * t)
    nu1 = lambda t: n1 * (1 + an1 * math.cos(freq * t))
    coeffs = CoupledCoefficients(mu1, const(m2), nu1, const(n2), lambda t: gam * math.cos(0.7 * t),
                                 mu1d, const(0.0))
    e = np.array([1.0, 1.3])
    mu0 = coeffs.mu(0.0)
    B0 = np.diag(1j / np.sqrt(2 * e))
    Bd0 = np.diag(-mu0 * np.sqrt(e / 2))
    sol = propagate_coupled(coeffs, B0, Bd0, 0.0, 30.0)
    B, Bd = unpack_nodes(sol.y)
    for t, b, bd in zip(sol.t[::50], B[::50], Bd[::50]):
        w = bd / coeffs.mu(t)[None, :]
        wc3 = w @ np.conj(b).T - b @ np.conj(w).T
        wc1 = w @ b.T - b @ w.T
        assert np.max(np.abs(wc3 - 1j * np.eye(2))) <= 1e-8
        assert np.max(np.abs(wc1)) <= 1e-8
