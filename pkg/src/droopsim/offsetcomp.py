"""Voltage-sensor offset estimation from DC-link ripple.

A DC offset in the AC voltage reading makes the inverter impose a real
DC component on its output voltage, which drives a DC circulating
current.  That current beats with the fundamental and puts a component
at the fundamental frequency into the bridge power, which the DC-link
capacitor integrates into bus ripple at that same frequency.  Extracting
the ripple with a band-pass filter and demodulating it against the
unit's own phase reference therefore recovers the offset, without any
extra sensors.

The demodulation carrier must account for how the DC link turns power
ripple into voltage ripple.  With a stiff source behind ``r_dc_source``
the bus impedance at the fundamental is ``Z = R / (1 + j*w*R*C)``; both
the carrier phase and the amplitude scaling derive from that Z, and they
reduce to the pure-capacitor values (quadrature carrier, gain
``w*C*v_nom``) when the source resistance is large enough to not matter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import NotWarmedUpError

__all__ = [
    "BandpassFilter",
    "OffsetEstimator",
    "EstimatorParams",
    "bpf_step",
    "estimator_step",
    "dc_ripple_demod_params",
]

TWO_PI = 2.0 * math.pi


@njit(cache=True)
def _bpf_coeffs(w0, wb, dt):
    # Prewarped Tustin transform of wb*s / (s^2 + wb*s + w0^2).
    k = w0 / math.tan(0.5 * w0 * dt)
    den = k * k + wb * k + w0 * w0
    b0 = wb * k / den
    a1 = 2.0 * (w0 * w0 - k * k) / den
    a2 = (k * k - wb * k + w0 * w0) / den
    return b0, a1, a2  # b1 = 0, b2 = -b0


@njit(cache=True)
def _biquad_bp_tick(s, x, b0, a1, a2):
    y = b0 * x + s[0]
    s[0] = -a1 * y + s[1]
    s[1] = -b0 * x - a2 * y
    return y


@njit(cache=True)
def _estimator_tick(bpf_s, v_dc_meas, theta, v_amp, omega,
                    wb, lpf_alpha, k_demod, psi, k_est, v_off_max,
                    lpf_d, v_off_hat, integrate, dt):
    """Filter, demodulate and (optionally) integrate one DC-bus sample.

    Returns ``(lpf_d, v_off_hat, ripple)``.  The carrier is
    ``-cos(theta - psi)``, the phase the bus ripple acquires for a
    positive offset residual; ``k_demod`` undoes the power-to-ripple
    attenuation so the demodulated signal reads directly in watts.
    """
    b0, a1, a2 = _bpf_coeffs(omega, wb, dt)
    ripple = _biquad_bp_tick(bpf_s, v_dc_meas, b0, a1, a2)
    carrier = -math.cos(theta - psi)
    d = ripple * carrier * k_demod
    lpf_d += lpf_alpha * (d - lpf_d)
    if integrate == 1:
        v_off_hat += k_est * (lpf_d / (0.5 * v_amp)) * dt
        if v_off_hat > v_off_max:
            v_off_hat = v_off_max
        elif v_off_hat < -v_off_max:
            v_off_hat = -v_off_max
    return lpf_d, v_off_hat, ripple


def dc_ripple_demod_params(omega: float, c_dc: float, r_dc_source: float,
                           v_dc_nominal: float):
    """Carrier phase and gain matched to the DC-link impedance.

    Returns ``(k_demod, psi)`` for a bus fed through ``r_dc_source``.
    ``psi`` is the angle by which the physical ripple leads the ideal
    integrator case, and ``k_demod`` maps ripple volts back to power
    watts.  For ``w*R*C >> 1`` this tends to ``(w*C*v_nom, 0)``.
    """
    if omega <= 0 or c_dc <= 0 or r_dc_source <= 0 or v_dc_nominal <= 0:
        raise ValueError("demodulation parameters must be positive")
    wrc = omega * r_dc_source * c_dc
    z_mag = r_dc_source / math.hypot(1.0, wrc)
    k_demod = v_dc_nominal / z_mag
    psi = math.atan(wrc) - 0.5 * math.pi
    return k_demod, psi


@dataclass
class BandpassFilter:
    """Second-order band-pass, centre ``omega_center``, width ``omega_b``."""

    omega_center: float
    omega_b: float
    state: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        if self.omega_center <= 0 or self.omega_b <= 0:
            raise ValueError("band-pass frequencies must be positive")


def bpf_step(filt: BandpassFilter, sample: float, dt: float,
             omega: float | None = None) -> float:
    """One filter step.  Passing ``omega`` retunes the centre on the fly,
    which is how the estimator keeps tracking the droop frequency."""
    w0 = filt.omega_center if omega is None else float(omega)
    b0, a1, a2 = _bpf_coeffs(w0, filt.omega_b, float(dt))
    return float(_biquad_bp_tick(filt.state, float(sample), b0, a1, a2))


@dataclass(frozen=True)
class EstimatorParams:
    """Gains and limits for one offset estimator.

    ``k_est`` sizes the integral action.  The loop has two very different
    natural stiffnesses: an error that differs between paralleled units
    drives DC current through the low-resistance tie lines and shows up
    strongly in the bus ripple, while an error common to all units only
    leaks through the load, so its ripple signature is tens of times
    weaker.  The default gain is chosen so that even the weak common mode
    settles within a few seconds; the stiff mode then closes in a few
    hundred milliseconds, still far below the demodulation low-pass
    corner, so both stay well damped.

    ``settle_time`` holds the integrator off for the given number of
    seconds after a black start.  Energising the filter and ramping the
    load floods the bus with fundamental-frequency ripple that has
    nothing to do with sensor offsets; integrating it would throw the
    estimate several volts off before the real signal emerges (the
    demodulator itself keeps running so its filters are settled the
    moment integration begins).
    """

    bpf_bandwidth_hz: float = 10.0
    lpf_cutoff_hz: float = 2.0
    k_est: float = 20.0
    v_off_max: float = 20.0
    settle_time: float = 0.5
    k_demod: float | None = None     # None means derive from the DC link
    carrier_trim: float = 0.0        # extra carrier phase, radians

    def __post_init__(self):
        if self.bpf_bandwidth_hz <= 0 or self.lpf_cutoff_hz <= 0:
            raise ValueError("estimator bandwidths must be positive")
        if self.k_est < 0 or self.v_off_max <= 0:
            raise ValueError("k_est must be >= 0 and v_off_max positive")
        if self.settle_time < 0:
            raise ValueError("settle_time must be >= 0")


class OffsetEstimator:
    """Closed-loop estimate of one unit's voltage-sensor offset.

    Feed every DC-bus sample through :meth:`observe` (or let
    :func:`estimator_step` do it); the estimate only starts moving once
    the band-pass filter has seen a full fundamental period and the
    ``settle_time`` hold-off has elapsed.
    """

    def __init__(self, params: EstimatorParams, omega_nominal: float, dt: float,
                 c_dc: float = 2e-3, r_dc_source: float = 0.5,
                 v_dc_nominal: float = 250.0, v_off_hat0: float = 0.0):
        if dt <= 0 or omega_nominal <= 0:
            raise ValueError("dt and omega_nominal must be positive")
        self.params = params
        self.dt = float(dt)
        k_auto, psi = dc_ripple_demod_params(omega_nominal, c_dc, r_dc_source,
                                             v_dc_nominal)
        self.k_demod = k_auto if params.k_demod is None else float(params.k_demod)
        self.psi = psi + params.carrier_trim
        self.bpf = BandpassFilter(omega_center=omega_nominal,
                                  omega_b=TWO_PI * params.bpf_bandwidth_hz)
        self.lpf_alpha = 1.0 - math.exp(-TWO_PI * params.lpf_cutoff_hz * dt)
        self.lpf_d = 0.0
        self.v_off_hat = float(v_off_hat0)
        self.warm_samples = max(round(TWO_PI / omega_nominal / dt),
                                math.ceil(params.settle_time / dt - 1e-9))
        self.count = 0

    @property
    def is_warm(self) -> bool:
        return self.count >= self.warm_samples

    def observe(self, v_dc_reading: float, theta: float, v_amp: float,
                omega: float | None = None) -> None:
        """Run the filters on one sample without touching the estimate."""
        self._tick(v_dc_reading, theta, v_amp, omega, integrate=False)

    def _tick(self, v_dc_reading, theta, v_amp, omega, integrate):
        if v_amp <= 0:
            raise ValueError("v_amp must be positive")
        w = self.bpf.omega_center if omega is None else float(omega)
        p = self.params
        self.lpf_d, self.v_off_hat, ripple = _estimator_tick(
            self.bpf.state, float(v_dc_reading), float(theta), float(v_amp), w,
            TWO_PI * p.bpf_bandwidth_hz, self.lpf_alpha, self.k_demod,
            self.psi, p.k_est, p.v_off_max, self.lpf_d, self.v_off_hat,
            1 if integrate else 0, self.dt)
        self.count += 1
        return ripple


def estimator_step(est: OffsetEstimator, v_dc_reading: float, theta: float,
                   v_amp: float, omega: float | None = None) -> float:
    """Advance the estimator by one control period.

    Raises :class:`NotWarmedUpError` until the band-pass filter has been
    fed one full fundamental period (use :meth:`OffsetEstimator.observe`
    for that warm-up).  Returns the updated offset estimate in volts.
    """
    if not est.is_warm:
        raise NotWarmedUpError(
            f"estimator has seen {est.count} of {est.warm_samples} warm-up samples")
    est._tick(v_dc_reading, theta, v_amp, omega, integrate=True)
    return est.v_off_hat
