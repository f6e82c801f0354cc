import math

import numpy as np
import pytest

from droopsim import (BandpassFilter, EstimatorParams, NotWarmedUpError,
                      OffsetEstimator, bpf_step, dc_ripple_demod_params,
                      estimator_step)

from oracles import bpf_analog_response, dc_bus_ripple_amp

TWO_PI = 2.0 * math.pi
OMEGA0 = TWO_PI * 50.0


def _measure_bpf(w_probe, dt=5e-5, omega_b=TWO_PI * 10.0):
    filt = BandpassFilter(omega_center=OMEGA0, omega_b=omega_b)
    n_settle, n_fit = round(0.4 / dt), round(0.2 / dt)
    t = np.arange(n_settle + n_fit) * dt
    y = np.array([bpf_step(filt, math.sin(w_probe * tk), dt) for tk in t])
    tail = slice(n_settle, None)
    a = 2.0 * np.mean(y[tail] * np.sin(w_probe * t[tail]))
    b = 2.0 * np.mean(y[tail] * np.cos(w_probe * t[tail]))
    return complex(a, b)


def test_bpf_blocks_dc():
    filt = BandpassFilter(omega_center=OMEGA0, omega_b=TWO_PI * 10.0)
    y = 0.0
    for _ in range(8000):
        y = bpf_step(filt, 1.0, 5e-5)
    assert abs(y) < 0.02


def test_bpf_unity_at_centre():
    h = _measure_bpf(OMEGA0)
    assert abs(h) == pytest.approx(1.0, abs=5e-3)
    assert math.degrees(math.atan2(h.imag, h.real)) == pytest.approx(0.0, abs=1.0)


def test_bpf_matches_analog_at_double_frequency():
    h = _measure_bpf(2.0 * OMEGA0)
    href = bpf_analog_response(2.0 * OMEGA0, TWO_PI * 10.0, OMEGA0)
    assert abs(h - href) <= 0.02 * abs(href)


def test_demod_gain_reduces_to_pure_capacitor_for_stiff_source():
    # with a very large source resistance the bus is just the capacitor,
    # whose ripple gain is 1/(omega C) and phase a quarter turn
    k, psi = dc_ripple_demod_params(OMEGA0, c_dc=2e-3, r_dc_source=1e9,
                                    v_dc_nominal=250.0)
    assert k == pytest.approx(OMEGA0 * 2e-3 * 250.0, rel=1e-6)
    assert psi == pytest.approx(0.0, abs=1e-6)


def test_demod_phase_accounts_for_source_resistance():
    k, psi = dc_ripple_demod_params(OMEGA0, c_dc=2e-3, r_dc_source=0.5,
                                    v_dc_nominal=250.0)
    wrc = OMEGA0 * 0.5 * 2e-3
    assert psi == pytest.approx(math.atan(wrc) - math.pi / 2)
    assert k == pytest.approx(250.0 * math.hypot(1.0, wrc) / 0.5)


def test_estimator_refuses_to_integrate_cold():
    est = OffsetEstimator(EstimatorParams(), OMEGA0, 5e-5)
    with pytest.raises(NotWarmedUpError):
        estimator_step(est, 250.0, 0.0, 200.0)


def test_estimator_hold_off_is_the_longer_of_period_and_settle():
    dt = 5e-5
    est = OffsetEstimator(EstimatorParams(settle_time=0.5), OMEGA0, dt)
    assert est.warm_samples == round(0.5 / dt)
    est = OffsetEstimator(EstimatorParams(settle_time=0.0), OMEGA0, dt)
    assert est.warm_samples == round(TWO_PI / OMEGA0 / dt)


def _drive_synthetic_ripple(k_est, p_ripple_amp, t_end=2.0, dt=5e-5):
    """Feed the estimator the exact bus waveform a fundamental-frequency
    power ripple produces and return the estimate trajectory."""
    v_bar, r_s, c_dc = 250.0, 0.5, 2e-3
    est = OffsetEstimator(EstimatorParams(k_est=k_est, settle_time=0.2),
                          OMEGA0, dt, c_dc=c_dc, r_dc_source=r_s,
                          v_dc_nominal=v_bar)
    amp = dc_bus_ripple_amp(p_ripple_amp, OMEGA0, v_bar, r_s, c_dc)
    zeta = -math.atan(OMEGA0 * r_s * c_dc)        # bus impedance angle
    out = []
    for k in range(round(t_end / dt)):
        th = OMEGA0 * k * dt
        v_dc = v_bar - amp * math.sin(th + zeta)  # bus dips when power peaks
        if est.is_warm:
            estimator_step(est, v_dc, th, 200.0, OMEGA0)
        else:
            est.observe(v_dc, th, 200.0, OMEGA0)
        out.append(est.v_off_hat)
    return np.array(out), est


def test_estimator_drives_against_positive_power_ripple():
    # a positive sin-phase power ripple is the signature of a unit
    # sourcing DC, which is what a sensor reading low (negative offset)
    # provokes, so the estimate must walk downward, at
    # k_est * ripple / (half amplitude) volts per second
    traj, est = _drive_synthetic_ripple(k_est=2.0, p_ripple_amp=50.0)
    slope = (traj[-1] - traj[len(traj) // 2]) / (1.0)
    expected = -2.0 * (50.0 / 2.0) / (0.5 * 200.0)
    assert slope == pytest.approx(expected, rel=0.05)


def test_estimator_gain_of_zero_freezes_the_estimate():
    traj, est = _drive_synthetic_ripple(k_est=0.0, p_ripple_amp=80.0)
    assert np.all(traj == 0.0)


def test_estimate_clamped_to_limit():
    par = EstimatorParams(k_est=50.0, v_off_max=3.0, settle_time=0.1)
    est = OffsetEstimator(par, OMEGA0, 5e-5)
    v_bar = 250.0
    amp = dc_bus_ripple_amp(400.0, OMEGA0, v_bar, 0.5, 2e-3)
    zeta = -math.atan(OMEGA0 * 0.5 * 2e-3)
    for k in range(40000):
        th = OMEGA0 * k * 5e-5
        v_dc = v_bar + amp * math.sin(th + zeta)   # inverted: estimate rises
        if est.is_warm:
            estimator_step(est, v_dc, th, 200.0, OMEGA0)
        else:
            est.observe(v_dc, th, 200.0, OMEGA0)
    assert est.v_off_hat == pytest.approx(3.0)


@pytest.mark.parametrize("kwargs", [
    dict(bpf_bandwidth_hz=0.0), dict(lpf_cutoff_hz=-1.0),
    dict(k_est=-0.5), dict(v_off_max=0.0), dict(settle_time=-0.1),
])
def test_estimator_parameter_validation(kwargs):
    with pytest.raises(ValueError):
        EstimatorParams(**kwargs)
