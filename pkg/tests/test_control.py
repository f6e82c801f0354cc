import math

import numpy as np
import pytest

from droopsim import (DroopParams, InverterController, P3rGains, PqState,
                      compute_pq, controller_step, droop_update, p3r_state,
                      p3r_step)

from oracles import (multi_sine_fit, p3r_analog_response, pq_closed_forms)

TWO_PI = 2.0 * math.pi
OMEGA0 = TWO_PI * 50.0


# ---------------------------------------------------------------------------
# droop law

def test_droop_slope_values():
    # coefficients passed explicitly; the shipped frequency-slope default
    # is shallower than this on purpose (see DroopParams)
    par = DroopParams(m=1e-3, n=2.5e-3)
    v, w = droop_update(1000.0, 0.0, par)
    assert v == pytest.approx(199.0)
    assert w == pytest.approx(OMEGA0)
    v, w = droop_update(714.0, 0.0, par)
    assert v == pytest.approx(199.286)
    v, w = droop_update(0.0, -40.0, par)
    assert v == pytest.approx(200.0)
    assert w == pytest.approx(OMEGA0 - 0.1)


def test_droop_is_linear_in_both_powers():
    par = DroopParams(m=2e-3, n=1e-3)
    v1, w1 = droop_update(100.0, 50.0, par)
    v2, w2 = droop_update(300.0, -10.0, par)
    vm, wm = droop_update(200.0, 20.0, par)
    assert vm == pytest.approx(0.5 * (v1 + v2))
    assert wm == pytest.approx(0.5 * (w1 + w2))


# ---------------------------------------------------------------------------
# single-phase P/Q measurement

def test_pq_matches_closed_form():
    dt = 5e-5
    state = PqState.create(50.0, dt, cutoff_hz=5.0)
    v_amp, i_amp, phi = 200.0, 7.0, 0.25
    p = q = 0.0
    for k in range(round(0.8 / dt)):
        th = OMEGA0 * k * dt
        p, q = compute_pq(v_amp * math.sin(th),
                          i_amp * math.sin(th - phi), state)
    p_ref, q_ref = pq_closed_forms(v_amp, i_amp, phi)
    assert p == pytest.approx(p_ref, rel=0.01)
    assert q == pytest.approx(q_ref, rel=0.01)
    assert q > 0        # lagging current counts as positive reactive power


def test_pq_needs_a_quarter_period():
    state = PqState.create(50.0, 5e-5, cutoff_hz=5.0)
    assert not state.is_warm
    for _ in range(len(state.vbuf)):
        compute_pq(1.0, 1.0, state)
    assert state.is_warm


# ---------------------------------------------------------------------------
# proportional-resonant cascade

def _measure_p3r(gains, w_probe, dt=5e-5, t_fit=0.5):
    """Complex gain of the discrete filter at w_probe, fitted jointly
    with the filter's own resonance frequencies so the undamped free
    response cannot contaminate the estimate."""
    state = p3r_state()
    n = round(t_fit / dt)
    t = np.arange(n) * dt
    x = np.sin(w_probe * t)
    y = np.empty(n)
    for k in range(n):
        y[k] = p3r_step(state, x[k], gains, OMEGA0, dt)
    omegas = [w_probe] + [h * OMEGA0 for h in (1, 3, 5) if h * OMEGA0 != w_probe]
    return multi_sine_fit(t, y, omegas)[0]


@pytest.mark.parametrize("w_probe", [
    TWO_PI * 48.0, TWO_PI * 52.0,       # around the fundamental
    TWO_PI * 148.0, TWO_PI * 152.0,     # around the third harmonic
    TWO_PI * 248.0, TWO_PI * 252.0,     # around the fifth
    TWO_PI * 36.0, TWO_PI * 500.0,      # far from any resonance
])
def test_p3r_matches_analog_response(w_probe):
    gains = P3rGains(kp=0.2, kr=(50.0, 20.0, 20.0))
    h_meas = _measure_p3r(gains, w_probe)
    h_ref = p3r_analog_response(w_probe, gains.kp, gains.kr, OMEGA0)
    assert abs(h_meas - h_ref) <= 0.02 * abs(h_ref)


def test_p3r_zero_resonant_gains_is_pure_proportional():
    gains = P3rGains(kp=2.0, kr=(0.0, 0.0, 0.0))
    state = p3r_state()
    rng = np.random.default_rng(3)
    for x in rng.normal(size=100):
        assert p3r_step(state, x, gains, OMEGA0, 5e-5) == 2.0 * x


def test_p3r_superposition():
    gains = P3rGains(kp=0.5, kr=(30.0, 10.0, 5.0))
    rng = np.random.default_rng(11)
    x1 = rng.normal(size=400)
    x2 = rng.normal(size=400)
    a, b = 1.7, -0.4
    s1, s2, s3 = p3r_state(), p3r_state(), p3r_state()
    for k in range(400):
        y1 = p3r_step(s1, x1[k], gains, OMEGA0, 5e-5)
        y2 = p3r_step(s2, x2[k], gains, OMEGA0, 5e-5)
        y3 = p3r_step(s3, a * x1[k] + b * x2[k], gains, OMEGA0, 5e-5)
        assert y3 == pytest.approx(a * y1 + b * y2, abs=1e-9)


# ---------------------------------------------------------------------------
# assembled controller

def test_controller_tracks_droop_reference_amplitude():
    dt = 5e-5
    ctrl = InverterController(DroopParams(), P3rGains(0.2, (50.0, 20.0, 20.0)),
                              P3rGains(4.0, (200.0, 0.0, 0.0)), dt)
    assert ctrl.v_amp == pytest.approx(200.0)
    assert ctrl.omega == pytest.approx(OMEGA0)
    cmd = controller_step(ctrl, 0.0, 0.0, 0.0)
    assert math.isfinite(cmd)
    # phase advances by one tick of the droop frequency
    assert ctrl.theta == pytest.approx(ctrl.omega * dt)


def test_controller_virtual_drop_lowers_reference():
    dt = 5e-5
    mk = lambda: InverterController(DroopParams(),
                                    P3rGains(0.2, (50.0, 20.0, 20.0)),
                                    P3rGains(4.0, (200.0, 0.0, 0.0)), dt)
    plain, dropped = mk(), mk()
    c1 = controller_step(plain, 0.0, 0.0, 5.0, v_vir=0.0)
    c2 = controller_step(dropped, 0.0, 0.0, 5.0, v_vir=1.0)
    assert c2 < c1
