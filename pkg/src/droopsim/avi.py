"""Adaptive virtual impedance over a slow, lossy communication bus.

Each unit reports its filtered active power to a central coordinator on
a fixed schedule.  The coordinator averages whatever it has heard and
broadcasts that average back; each unit then trims a virtual resistance
with a PI law until its own power matches the average.  Messages take a
finite time to arrive and can be dropped, so the controller must behave
sensibly on stale data — it simply freezes.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import NoReportsError

__all__ = [
    "AviPiParams",
    "AviPiState",
    "LbcParams",
    "Message",
    "LbcChannel",
    "MgccState",
    "mgcc_average",
    "channel_step",
    "avi_pi_step",
    "virtual_drop",
]


@njit(cache=True)
def _avi_tick(integral, p_avg, p_local, kp, ki, rv_min, rv_max, sign, dt):
    """PI update toward equal power sharing; returns (r_v, integral).

    Integration freezes whenever the unclamped output already sits
    against the limit the error keeps pushing toward.
    """
    e = sign * (p_avg - p_local)
    r_raw = kp * e + integral
    pushing_up = r_raw >= rv_max and e > 0.0
    pushing_down = r_raw <= rv_min and e < 0.0
    if not (pushing_up or pushing_down):
        integral += ki * e * dt
    r_v = kp * e + integral
    if r_v > rv_max:
        r_v = rv_max
    elif r_v < rv_min:
        r_v = rv_min
    return r_v, integral


@dataclass(frozen=True)
class AviPiParams:
    """PI gains and limits for the virtual-resistance adaptation.

    ``sign`` fixes which way the resistance moves for a positive power
    surplus; -1 raises the virtual resistance of an over-producing unit,
    which is the stabilising direction for resistive lines.

    The default integral gain walks the virtual resistance across a
    typical line mismatch in about a second, bringing the power gap
    under one percent well inside three; the adaptation bandwidth this
    implies (a few rad/s) stays far below the power-filter corner and
    the reporting rate, so the loop has ample phase margin.
    """

    kp: float = 1e-4
    ki: float = 2e-3
    rv_min: float = -0.1
    rv_max: float = 1.0
    sign: float = -1.0

    def __post_init__(self):
        if self.kp < 0 or self.ki < 0:
            raise ValueError("PI gains must be non-negative")
        if self.rv_min >= self.rv_max:
            raise ValueError("rv_min must be below rv_max")
        if self.sign not in (-1.0, 1.0):
            raise ValueError("sign must be -1 or +1")


@dataclass
class AviPiState:
    params: AviPiParams
    integral: float = 0.0
    r_v: float = 0.0


def avi_pi_step(state: AviPiState, p_avg: float, p_local: float,
                dt: float) -> float:
    """One PI step on fresh coordinator data; returns the new r_v.

    Staleness is the caller's business: when the last broadcast is too
    old, skip this call and keep using ``state.r_v``.
    """
    p = state.params
    r_v, integral = _avi_tick(state.integral, float(p_avg), float(p_local),
                              p.kp, p.ki, p.rv_min, p.rv_max, p.sign, float(dt))
    state.integral = integral
    state.r_v = r_v
    return r_v


def virtual_drop(r_v: float, i_o_meas: float) -> float:
    """Voltage taken off the droop reference for a measured line current."""
    return r_v * i_o_meas


def mgcc_average(reports) -> float:
    """Plain mean of the latest per-unit power reports.

    ``reports`` maps unit id to its most recent power.  Hook point for
    weighted schemes later; for now every unit counts the same.  Raises
    :class:`NoReportsError` when nothing has arrived yet.
    """
    values = list(reports.values()) if isinstance(reports, dict) else list(reports)
    if not values:
        raise NoReportsError("no power reports received yet")
    return float(sum(values) / len(values))


@dataclass(frozen=True)
class LbcParams:
    report_period: float = 0.1
    latency: float = 0.01
    drop_probability: float = 0.0
    stale_periods: int = 5

    def __post_init__(self):
        if self.report_period <= 0 or self.latency < 0:
            raise ValueError("report_period must be positive, latency >= 0")
        if not (0.0 <= self.drop_probability <= 1.0):
            raise ValueError("drop_probability must lie in [0, 1]")
        if self.stale_periods < 1:
            raise ValueError("stale_periods must be at least 1")

    @property
    def stale_limit(self) -> float:
        return self.stale_periods * self.report_period


@dataclass(frozen=True)
class Message:
    t_send: float
    t_deliver: float
    sender: str
    value: float
    dropped: bool


@dataclass
class MgccState:
    """Coordinator mailbox: last heard value per unit, and their mean."""

    latest: dict = field(default_factory=dict)
    p_avg: float | None = None

    def receive(self, unit: int, value: float) -> float:
        self.latest[unit] = value
        self.p_avg = mgcc_average(self.latest)
        return self.p_avg


class LbcChannel:
    """Low-bandwidth bus carrying unit reports and coordinator broadcasts.

    Every message gets its drop decision when it is sent, from a seeded
    generator, so a run is reproducible message-for-message.  Broadcasts
    are a single message heard by all units at once.
    """

    def __init__(self, params: LbcParams, seed: int):
        self.params = params
        self.rng = np.random.default_rng(seed)
        self._queue = []   # heap of (t_deliver, seq, sender, unit_or_None, value)
        self._seq = 0
        self.log: list[Message] = []

    def send(self, now: float, sender: str, value: float, unit=None) -> None:
        dropped = bool(self.rng.random() < self.params.drop_probability)
        t_deliver = now + self.params.latency
        self.log.append(Message(now, t_deliver, sender, value, dropped))
        if not dropped:
            heapq.heappush(self._queue, (t_deliver, self._seq, sender, unit, value))
            self._seq += 1

    def due(self, now: float):
        """Pop and return every queued message with t_deliver <= now."""
        out = []
        while self._queue and self._queue[0][0] <= now + 1e-12:
            t_deliver, _, sender, unit, value = heapq.heappop(self._queue)
            out.append((t_deliver, sender, unit, value))
        return out

    def next_deliver_time(self):
        return self._queue[0][0] if self._queue else None


def channel_step(channel: LbcChannel, mgcc: MgccState, now: float,
                 reports: dict | None = None) -> list:
    """Move the bus forward to time ``now``.

    ``reports`` maps unit id -> power to put on the bus right now.
    Deliveries due by ``now`` are drained in send order: unit reports
    update the coordinator, which immediately broadcasts its new average
    back over the same channel (one message, heard by every unit).
    Returns the ``(t_deliver, p_avg)`` pairs of broadcasts that arrived
    during this call, oldest first.
    """
    if reports:
        for unit in sorted(reports):
            channel.send(now, f"dg{unit}", float(reports[unit]), unit=unit)
    arrived = []
    while True:
        batch = channel.due(now)
        if not batch:
            break
        for t_deliver, sender, unit, value in batch:
            if sender.startswith("dg"):
                p_avg = mgcc.receive(unit, value)
                channel.send(t_deliver, "mgcc", p_avg)
            else:
                arrived.append((t_deliver, value))
    return arrived
