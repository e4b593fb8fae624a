import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from speedmeter.detuning import (
    DetuningParams,
    QuadratureCoefficients,
    detuned_double_psd,
    detuned_single_psd,
    equal_power_coupling,
    matched_delta_prime,
    matching_condition,
    optimize_g_detuned,
    phase_derivatives,
    quadrature_signal_transfers,
    second_coupling,
    theta_factor,
)
from speedmeter.noise import g_opt_position, g_opt_velocity, position_psd, velocity_psd
from speedmeter.response import REFERENCE

K = REFERENCE.kappa
PV = REFERENCE.replace(G=g_opt_velocity(REFERENCE))
PP = REFERENCE.replace(G=g_opt_position(REFERENCE, 1e-6))
GRID = np.geomspace(1.0, 1e8, 500)
MATCHED = DetuningParams(delta=-K, omega_sig=1e5, delta_prime=K)


def test_params_validation():
    with pytest.raises(ValueError):
        DetuningParams(delta=0.0, omega_sig=0.0)
    with pytest.raises(ValueError):
        DetuningParams(delta=0.0, omega_sig=1.0, kappa_prime=-1.0)
    with pytest.raises(ValueError):
        DetuningParams(delta=math.nan, omega_sig=1.0)
    with pytest.raises(ValueError):
        QuadratureCoefficients(1.0, 1j)


def test_single_reduces_to_position():
    br = detuned_single_psd(GRID, PP, DetuningParams(delta=0.0, omega_sig=1e6))
    np.testing.assert_allclose(br.total, position_psd(GRID, PP).total, rtol=1e-10)


def test_double_reduces_to_velocity():
    br = detuned_double_psd(GRID, PV, DetuningParams(delta=0.0, omega_sig=1e5))
    ref = velocity_psd(GRID, PV).total
    fin = np.isfinite(ref)
    np.testing.assert_allclose(br.total[fin], ref[fin], rtol=1e-8)


def test_p_quadrature_carries_no_signal():
    d = DetuningParams(delta=K, omega_sig=1e6)
    c, t_q, t_p = quadrature_signal_transfers(np.array([d.omega_sig]), PP, d)
    assert abs(t_p[0]) < 1e-10 * abs(t_q[0])


@pytest.mark.parametrize("topology,p,d", [
    ("single", PP, DetuningParams(delta=0.7 * K, omega_sig=1e6)),
    ("double", PV.replace(G=equal_power_coupling(PV.G, -K, K)), MATCHED),
])
def test_unbiased_at_signal_frequency(topology, p, d):
    c, t_q, t_p = quadrature_signal_transfers(np.array([d.omega_sig]), p, d, topology)
    assert complex(t_q[0] / c.norm) == pytest.approx(1.0, abs=1e-10)


def test_unknown_topology():
    with pytest.raises(ValueError):
        quadrature_signal_transfers([1.0], PP, MATCHED, "triple")


def test_symmetric_matching():
    assert matching_condition(PV, MATCHED) == 0.0


@pytest.mark.parametrize("ratio", [0.3, 1.0, 2.0])
def test_positive_ratio_never_matches(ratio):
    for dp in (0.0, K, -3 * K):
        assert matching_condition(PV, DetuningParams(-K, 1e5, dp, g_ratio=ratio)) > 0
    with pytest.raises(ValueError):
        matched_delta_prime(PV, DetuningParams(-K, 1e5, g_ratio=ratio))


@pytest.mark.parametrize("g_ratio,kp", [(-1.0, None), (-2.0, 2 * K), (-3.0, 0.5 * K)])
def test_matched_delta_prime_zeroes_residual(g_ratio, kp):
    d = DetuningParams(delta=-0.8 * K, omega_sig=1e5, g_ratio=g_ratio, kappa_prime=kp)
    dp = matched_delta_prime(PV, d)
    d = DetuningParams(d.delta, d.omega_sig, dp, kp, g_ratio)
    assert abs(matching_condition(PV, d)) < 1e-12
    total, single = phase_derivatives(PV, d)
    assert abs(total) < 1e-6 * abs(single)


def test_unmatched_phase_depends_on_position():
    d = DetuningParams(-K, 1e5, K, g_ratio=-0.5)
    total, single = phase_derivatives(PV, d)
    assert abs(total) > 0.1 * abs(single)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e8, 1e8), st.floats(-1e8, 1e8), st.floats(1e3, 1e9))
def test_theta_unit_modulus(delta, delta_prime, kp):
    d = DetuningParams(delta, 1e5, delta_prime, kp)
    assert abs(theta_factor(PV, d)) == pytest.approx(1.0, abs=1e-12)


def test_second_coupling_resonant():
    d = DetuningParams(0.0, 1e5)
    assert second_coupling(PV, d) == pytest.approx(PV.G * math.sqrt(1 - PV.L), rel=1e-15)


def test_detuning_helps_single_in_some_band():
    tau = 1e-6
    d = DetuningParams(delta=K, omega_sig=1 / tau)
    q = REFERENCE.replace(G=optimize_g_detuned(REFERENCE, d))
    nu = np.geomspace(1e2, 1e8, 200)
    ratio = detuned_single_psd(nu, q, d).total / position_psd(nu, PP).total
    assert ratio.min() < 1


def test_matched_double_close_to_resonant_below_first_spike():
    q = PV.replace(G=equal_power_coupling(PV.G, -K, K))
    nu = np.geomspace(1e4, 5.5e5, 500)
    ratio = detuned_double_psd(nu, q, MATCHED).total / velocity_psd(nu, PV).total
    assert np.all((ratio >= 0.5) & (ratio <= 2.0))


def test_matched_double_pays_at_low_frequency():
    q = PV.replace(G=equal_power_coupling(PV.G, -K, K))
    nu = np.geomspace(0.1, 100.0, 20)
    ratio = detuned_double_psd(nu, q, MATCHED).total / velocity_psd(nu, PV).total
    assert np.all(ratio > 1)
    assert np.all(np.diff(ratio) < 0)


def test_equal_power_coupling():
    g = equal_power_coupling(2.0, K, K)
    assert g**2 / (K**2 + K**2 / 4) == pytest.approx(4.0 / (K**2 / 4), rel=1e-15)


def test_optimize_g_detuned_bad_topology():
    with pytest.raises(ValueError):
        optimize_g_detuned(REFERENCE, MATCHED, topology="x")
