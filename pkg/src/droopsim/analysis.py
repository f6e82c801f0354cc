"""Waveform metrics: circulating current, power decomposition, sharing
error and harmonic content.

Everything here works on windows spanning an integer number of
fundamental periods, which makes the single-bin Fourier projections
leakage-free: the DC, fundamental and double-frequency components of a
signal are then mutually orthogonal and can be read off independently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import WindowMismatchError, ZeroTotalPowerError

__all__ = [
    "WaveformWindow",
    "PowerDecomposition",
    "fourier_bin",
    "decompose_power",
    "circulating_current",
    "sharing_error",
    "harmonic_distortion",
]


@dataclass(frozen=True)
class WaveformWindow:
    """Uniformly sampled snippet covering whole fundamental periods.

    The constructor rejects windows whose span is not an integer number
    of periods of ``omega`` (within one part in 1e6), because every
    metric below silently assumes exactly that.
    """

    samples: np.ndarray
    dt: float
    omega: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or len(samples) < 2:
            raise WindowMismatchError("window needs a 1-D array of >= 2 samples")
        if self.dt <= 0 or self.omega <= 0:
            raise WindowMismatchError("dt and omega must be positive")
        periods = len(samples) * self.dt * self.omega / (2.0 * math.pi)
        if abs(periods - round(periods)) > 1e-6 * max(1.0, periods) or round(periods) < 1:
            raise WindowMismatchError(
                f"window spans {periods:.6f} fundamental periods, need an integer >= 1")

    @property
    def n_periods(self) -> int:
        return round(len(self.samples) * self.dt * self.omega / (2.0 * math.pi))

    def time(self) -> np.ndarray:
        return np.arange(len(self.samples)) * self.dt


@dataclass(frozen=True)
class PowerDecomposition:
    """DC, fundamental and double-frequency content of a power waveform.

    Oscillating parts are (amplitude, phase) with the convention
    ``amp * cos(k*omega*t + phase)``, t measured from the window start.
    """

    p_dc: float
    p_omega: tuple
    p_2omega: tuple


def fourier_bin(window: WaveformWindow, harmonic: int):
    """Single-bin projection at ``harmonic`` times the fundamental.

    Returns ``(amplitude, phase)`` so the component is
    ``amplitude * cos(harmonic*omega*t + phase)``; for ``harmonic == 0``
    the amplitude is the plain mean and the phase is zero.
    """
    if harmonic < 0:
        raise ValueError("harmonic must be >= 0")
    x = window.samples
    if harmonic == 0:
        return float(np.mean(x)), 0.0
    wt = harmonic * window.omega * window.time()
    a = 2.0 * np.mean(x * np.cos(wt))
    b = 2.0 * np.mean(x * np.sin(wt))
    return float(math.hypot(a, b)), float(math.atan2(-b, a))


def _check_aligned(w1: WaveformWindow, w2: WaveformWindow):
    if len(w1.samples) != len(w2.samples):
        raise WindowMismatchError("windows differ in length")
    if not math.isclose(w1.dt, w2.dt, rel_tol=1e-12):
        raise WindowMismatchError("windows differ in sample time")
    if not math.isclose(w1.omega, w2.omega, rel_tol=1e-9):
        raise WindowMismatchError("windows differ in fundamental frequency")


def decompose_power(v: WaveformWindow, i: WaveformWindow) -> PowerDecomposition:
    """Split the instantaneous power ``v*i`` into its 0, 1x and 2x bins.

    A voltage carrying a DC offset against a current carrying a DC
    component produces exactly the cross terms this separates: the DC
    bin holds the average power, the fundamental bin is the offset
    signature, and the double-frequency bin is the usual single-phase
    pulsation.
    """
    _check_aligned(v, i)
    p = WaveformWindow(v.samples * i.samples, v.dt, v.omega)
    dc, _ = fourier_bin(p, 0)
    return PowerDecomposition(p_dc=dc,
                              p_omega=fourier_bin(p, 1),
                              p_2omega=fourier_bin(p, 2))


def circulating_current(i_o1: WaveformWindow, i_o2: WaveformWindow):
    """DC and AC content of the branch current difference.

    Returns ``(i_dc, i_ac_rms)`` of ``i_o1 - i_o2``: the mean, and the
    RMS of what is left after removing the mean.
    """
    _check_aligned(i_o1, i_o2)
    delta = i_o1.samples - i_o2.samples
    i_dc = float(np.mean(delta))
    ac = delta - i_dc
    return i_dc, float(math.sqrt(np.mean(ac * ac)))


def sharing_error(p1: float, p2: float) -> float:
    """Relative mismatch |p1 - p2| over the per-unit average."""
    avg = 0.5 * (p1 + p2)
    if avg <= 0:
        raise ZeroTotalPowerError(f"average power {avg} is not positive")
    return abs(p1 - p2) / avg


def harmonic_distortion(v: WaveformWindow, harmonics=(3, 5)) -> float:
    """Distortion ratio: RSS of the given harmonics over the fundamental."""
    fund, _ = fourier_bin(v, 1)
    if fund <= 0:
        raise ZeroTotalPowerError("fundamental amplitude is not positive")
    rss = math.sqrt(sum(fourier_bin(v, h)[0] ** 2 for h in harmonics))
    return rss / fund
