"""Scenario runner.

The control ticks and plant sub-steps execute inside one jitted kernel
that strings together the exact same ``njit`` pieces the public
single-step API uses.  Python only takes over at "slow" boundaries:
timed scenario events, communication-bus activity and the end of the
run.  Every control tick of every channel is recorded at full rate;
decimation happens at write-out time, so a decimated file is literally a
row subset of the full one.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .analysis import (WaveformWindow, circulating_current, fourier_bin,
                       harmonic_distortion)
from .avi import LbcChannel, MgccState, _avi_tick, channel_step
from .control import TWO_PI, _controller_tick
from .errors import (DcCollapseError, IoError, NonFiniteError,
                     ScenarioValidationError)
from .offsetcomp import _estimator_tick, dc_ripple_demod_params
from .plant import _cached_matrices, _dc_substep, _lc_substep, _node_voltage
from .scenario import Scenario, validate_scenario

__all__ = ["RunArtifacts", "run_scenario"]


@njit(cache=True)
def _run_chunk(k0, k1, n_sub, dt_c, dt_p,
               m_tz, b_tz, r_line, r_load, v_nom, c_dc, r_s,
               x, v_dc, xs, vcmd, sens,
               theta, vamp, omg, plpf, qlpf,
               vbuf, ibuf, bufpos, bufcnt, rs_v, rs_i,
               droop_cfg, vkp, vkr, ikp, ikr, pq_alpha,
               comp_on, warm_ticks, bpf_s, lpfd, voff, est_cfg,
               avi_on, r_v, avi_integ, p_avg, fresh_until,
               avi_cfg,
               out_vc, out_io, out_vdc, out_plpf, out_qlpf,
               out_rv, out_voff, out_vamp):
    """Advance ticks [k0, k1).  Returns (status, tick): status 0 is a
    clean finish, 1 a non-finite state, 2 a collapsed DC bus."""
    n = r_line.shape[0]
    for k in range(k0, k1):
        t = k * dt_c
        v_load = _node_voltage(x, r_line, r_load)
        for i in range(n):
            i_l = x[2 * i]
            v_c = x[2 * i + 1]
            i_o = (v_c - v_load) / r_line[i]
            v_meas = v_c * sens[i, 1] + sens[i, 0]
            iinv_meas = i_l * sens[i, 3] + sens[i, 2]
            io_meas = i_o * sens[i, 5] + sens[i, 4]
            vdc_meas = v_dc[i] * sens[i, 7] + sens[i, 6]
            # The ripple filters run from t = 0 so they are always warm;
            # only the estimate integration is gated, per unit, past the
            # black-start transient.
            integrate = 1 if (comp_on == 1 and k >= warm_ticks[i]) else 0
            lpfd[i], voff[i], _ = _estimator_tick(
                bpf_s[i], vdc_meas, theta[i], vamp[i], omg[i],
                est_cfg[i, 0], est_cfg[i, 1], est_cfg[i, 2], est_cfg[i, 3],
                est_cfg[i, 4], est_cfg[i, 5], lpfd[i], voff[i], integrate, dt_c)
            if avi_on == 1 and t <= fresh_until[i]:
                r_v[i], avi_integ[i] = _avi_tick(
                    avi_integ[i], p_avg[i], plpf[i],
                    avi_cfg[i, 0], avi_cfg[i, 1], avi_cfg[i, 2],
                    avi_cfg[i, 3], avi_cfg[i, 4], dt_c)
            v_vir = r_v[i] * io_meas
            cmd = _controller_tick(
                i, theta, vamp, omg, plpf, qlpf,
                vbuf, ibuf, bufpos, bufcnt, rs_v, rs_i,
                v_meas, iinv_meas, io_meas, voff[i], v_vir,
                droop_cfg[i, 0], droop_cfg[i, 1], droop_cfg[i, 2],
                droop_cfg[i, 3],
                vkp[i], vkr[i], ikp[i], ikr[i], pq_alpha[i], dt_c)
            if cmd > v_dc[i]:
                cmd = v_dc[i]
            elif cmd < -v_dc[i]:
                cmd = -v_dc[i]
            vcmd[i] = cmd
        for _ in range(n_sub):
            _lc_substep(m_tz, b_tz, x, vcmd, xs)
            for i in range(n):
                il_mid = 0.5 * (x[2 * i] + xs[2 * i])
                v_dc[i] = _dc_substep(v_dc[i], vcmd[i] * il_mid,
                                      v_nom, c_dc, r_s, dt_p)
            for j in range(2 * n):
                x[j] = xs[j]
        ok = True
        for j in range(2 * n):
            if not math.isfinite(x[j]):
                ok = False
        for i in range(n):
            if not math.isfinite(v_dc[i]):
                ok = False
        if not ok:
            return 1, k
        for i in range(n):
            if v_dc[i] < 0.5 * v_nom:
                return 2, k
        v_load = _node_voltage(x, r_line, r_load)
        kk = k + 1
        for i in range(n):
            v_c = x[2 * i + 1]
            out_vc[i, kk] = v_c
            out_io[i, kk] = (v_c - v_load) / r_line[i]
            out_vdc[i, kk] = v_dc[i]
            out_plpf[i, kk] = plpf[i]
            out_qlpf[i, kk] = qlpf[i]
            out_rv[i, kk] = r_v[i]
            out_voff[i, kk] = voff[i]
            out_vamp[i, kk] = vamp[i]
    return 0, k1


_CHANNELS = ("v_c", "i_o", "v_dc", "p_lpf", "q_lpf", "r_v", "v_off_hat", "v_amp")


@dataclass
class RunArtifacts:
    """Everything a finished run produced.

    Time series are full rate, shaped ``(n_units, n_ticks + 1)`` with
    row 0 the initial condition.  ``metrics`` holds one row per analysis
    window (column name -> array).  The CSV writers decimate and format;
    they never recompute physics.
    """

    scenario: Scenario
    seed: int
    decimate: int
    t: np.ndarray
    v_c: np.ndarray
    i_o: np.ndarray
    v_dc: np.ndarray
    p_lpf: np.ndarray
    q_lpf: np.ndarray
    r_v: np.ndarray
    v_off_hat: np.ndarray
    v_amp: np.ndarray
    messages: list
    metric_columns: list
    metrics: dict
    wall_time: float

    @property
    def n_units(self) -> int:
        return self.v_c.shape[0]

    def channel(self, name: str) -> np.ndarray:
        if name not in _CHANNELS:
            raise KeyError(f"unknown channel {name!r}, have {_CHANNELS}")
        return getattr(self, name)

    def waveform(self, name: str, unit: int, t_start: float, t_end: float,
                 omega: float | None = None) -> WaveformWindow:
        """Slice one channel of one unit into an analysis window.

        ``unit`` is 1-based.  The window must span whole fundamental
        periods of ``omega`` (the unit's nominal by default).
        """
        arr = self.channel(name)
        if not (1 <= unit <= self.n_units):
            raise IndexError(f"unit {unit} out of range 1..{self.n_units}")
        dt = self.scenario.dt_control
        k0 = round(t_start / dt)
        k1 = round(t_end / dt)
        if not (0 <= k0 < k1 <= len(self.t) - 1):
            raise IndexError(f"window [{t_start}, {t_end}] outside the run")
        w = self.scenario.dgs[unit - 1].droop.omega0 if omega is None else omega
        return WaveformWindow(arr[unit - 1, k0 + 1:k1 + 1].copy(), dt, w)

    # -- delimited writers -------------------------------------------------

    def timeseries_header(self) -> list:
        n = self.n_units
        cols = ["t"]
        cols += [f"v_c{i}" for i in range(1, n + 1)]
        cols += [f"i_o{i}" for i in range(1, n + 1)]
        if n == 2:
            cols.append("i_circ")
        cols += [f"v_dc{i}" for i in range(1, n + 1)]
        cols += [f"P{i}" for i in range(1, n + 1)]
        cols += [f"Q{i}" for i in range(1, n + 1)]
        cols += [f"Rv{i}" for i in range(1, n + 1)]
        cols += [f"voff_hat{i}" for i in range(1, n + 1)]
        return cols

    def write_timeseries(self, path) -> None:
        if self.t.size == 0:
            raise IoError("no samples to write")
        idx = np.arange(0, len(self.t), self.decimate)
        blocks = [self.t[idx][None, :], self.v_c[:, idx], self.i_o[:, idx]]
        if self.n_units == 2:
            blocks.append((self.i_o[0, idx] - self.i_o[1, idx])[None, :])
        blocks += [self.v_dc[:, idx], self.p_lpf[:, idx], self.q_lpf[:, idx],
                   self.r_v[:, idx], self.v_off_hat[:, idx]]
        table = np.vstack(blocks).T
        _write_csv(path, self.timeseries_header(), table)

    def write_metrics(self, path) -> None:
        if not self.metric_columns:
            raise IoError("no metrics to write")
        table = np.column_stack([self.metrics[c] for c in self.metric_columns])
        _write_csv(path, self.metric_columns, table)

    def write_messages(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("t_send,t_deliver,sender,value,dropped\n")
            for msg in self.messages:
                fh.write(f"{msg.t_send:.9g},{msg.t_deliver:.9g},{msg.sender},"
                         f"{msg.value:.9g},{int(msg.dropped)}\n")

    def final_metrics(self) -> dict:
        """Last analysis window as a plain dict."""
        if not self.metric_columns:
            raise IoError("run too short for a single analysis window")
        return {c: float(self.metrics[c][-1]) for c in self.metric_columns}

    def summary_text(self) -> str:
        lines = [
            f"scenario = {self.scenario.name}",
            f"seed = {self.seed}",
            f"duration_s = {self.scenario.duration:.9g}",
            f"n_units = {self.n_units}",
            f"control_ticks = {len(self.t) - 1}",
            f"decimate = {self.decimate}",
            f"wall_time_s = {self.wall_time:.3f}",
        ]
        if self.metric_columns:
            lines.append("# final analysis window")
            for key, val in self.final_metrics().items():
                lines.append(f"{key} = {val:.9g}")
        return "\n".join(lines) + "\n"

    def write_summary(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.summary_text())


def _write_csv(path, header, table) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in table:
            fh.write(",".join(f"{v:.9g}" for v in row) + "\n")


def _tick_ceil(t: float, dt: float) -> int:
    return int(math.ceil(t / dt - 1e-9))


def run_scenario(sc: Scenario, *, seed: int | None = None,
                 decimate: int | None = None) -> RunArtifacts:
    """Simulate one scenario start to finish.

    ``seed`` and ``decimate`` override the scenario's values (the CLI
    uses this).  Raises :class:`NonFiniteError` or
    :class:`DcCollapseError` with the failure time attached if the run
    goes numerically bad.
    """
    validate_scenario(sc)
    seed_eff = sc.seed if seed is None else int(seed)
    dec = sc.decimate if decimate is None else int(decimate)
    if dec < 1:
        raise ScenarioValidationError("decimate", "must be at least 1")

    t_start_wall = time.perf_counter()
    n = sc.n_units
    dt_c = sc.dt_control
    n_ticks = sc.n_ticks
    n_sub = round(dt_c / sc.dt_plant)
    dt_p = dt_c / n_sub

    # mutable plant configuration (events may rewrite it)
    r_line = np.array([dg.r_line for dg in sc.dgs])
    r_load = sc.r_load
    m_tz, b_tz = _cached_matrices(sc.l_f, sc.c_f, tuple(r_line), r_load, dt_p)

    # electrical state
    x = np.zeros(2 * n)
    v_dc = np.full(n, sc.v_dc_nominal)
    xs = np.empty_like(x)
    vcmd = np.zeros(n)

    # per-unit controller state
    sens = np.vstack([dg.sensors.as_array() for dg in sc.dgs])
    theta = np.zeros(n)
    vamp = np.array([dg.droop.v0 for dg in sc.dgs])
    omg = np.array([dg.droop.omega0 for dg in sc.dgs])
    plpf = np.zeros(n)
    qlpf = np.zeros(n)
    buf_len = round(1.0 / (4.0 * (sc.dgs[0].droop.omega0 / TWO_PI) * dt_c))
    vbuf = np.zeros((n, buf_len))
    ibuf = np.zeros((n, buf_len))
    bufpos = np.zeros(n, dtype=np.int64)
    bufcnt = np.zeros(n, dtype=np.int64)
    rs_v = np.zeros((n, 3, 2))
    rs_i = np.zeros((n, 3, 2))
    droop_cfg = np.array([[dg.droop.v0, dg.droop.omega0, dg.droop.m, dg.droop.n]
                          for dg in sc.dgs])
    vkp = np.array([dg.v_gains.kp for dg in sc.dgs])
    vkr = np.vstack([dg.v_gains.kr_array() for dg in sc.dgs])
    ikp = np.array([dg.i_gains.kp for dg in sc.dgs])
    ikr = np.vstack([dg.i_gains.kr_array() for dg in sc.dgs])
    pq_alpha = np.array([1.0 - math.exp(-TWO_PI * dg.pq_cutoff_hz * dt_c)
                         for dg in sc.dgs])

    # offset estimator state
    bpf_s = np.zeros((n, 2))
    lpfd = np.zeros(n)
    voff = np.array([dg.est_initial for dg in sc.dgs])
    est_cfg = np.zeros((n, 6))
    for i, dg in enumerate(sc.dgs):
        k_auto, psi = dc_ripple_demod_params(dg.droop.omega0, sc.c_dc,
                                             sc.r_dc_source, sc.v_dc_nominal)
        k_demod = k_auto if dg.est.k_demod is None else dg.est.k_demod
        est_cfg[i] = (TWO_PI * dg.est.bpf_bandwidth_hz,
                      1.0 - math.exp(-TWO_PI * dg.est.lpf_cutoff_hz * dt_c),
                      k_demod, psi + dg.est.carrier_trim,
                      dg.est.k_est, dg.est.v_off_max)
    warm_ticks = np.array(
        [max(round(TWO_PI / dg.droop.omega0 / dt_c),
             _tick_ceil(dg.est.settle_time, dt_c)) for dg in sc.dgs],
        dtype=np.int64)

    # adaptation state and the communication side
    r_v = np.zeros(n)
    avi_integ = np.zeros(n)
    p_avg = np.zeros(n)
    fresh_until = np.full(n, -math.inf)
    avi_cfg = np.array([[dg.avi.kp, dg.avi.ki, dg.avi.rv_min, dg.avi.rv_max,
                         dg.avi.sign] for dg in sc.dgs])
    channel = LbcChannel(sc.lbc, seed_eff)
    mgcc = MgccState()
    next_report = sc.lbc.report_period
    stale_limit = sc.lbc.stale_limit

    comp_on = 1 if sc.offset_comp_enabled else 0
    avi_on = 1 if sc.avi_enabled else 0

    # full-rate recording, row 0 is the initial condition
    shape = (n, n_ticks + 1)
    out = {name: np.zeros(shape) for name in _CHANNELS}
    out["v_dc"][:, 0] = v_dc
    out["v_off_hat"][:, 0] = voff
    out["v_amp"][:, 0] = vamp

    ev_ticks = [round(ev.time / dt_c) for ev in sc.events]
    ev_idx = 0

    k = 0
    while k < n_ticks:
        t = k * dt_c
        while ev_idx < len(sc.events) and ev_ticks[ev_idx] <= k:
            ev = sc.events[ev_idx]
            if ev.action == "enable_avi":
                avi_on = 1
            elif ev.action == "disable_avi":
                avi_on = 0
            elif ev.action == "enable_offset_comp":
                comp_on = 1
            elif ev.action == "disable_offset_comp":
                comp_on = 0
            elif ev.action == "set_load":
                r_load = float(ev.args[0])
                m_tz, b_tz = _cached_matrices(sc.l_f, sc.c_f, tuple(r_line),
                                              r_load, dt_p)
            elif ev.action == "set_line":
                r_line[int(ev.args[0]) - 1] = float(ev.args[1])
                m_tz, b_tz = _cached_matrices(sc.l_f, sc.c_f, tuple(r_line),
                                              r_load, dt_p)
            ev_idx += 1
        reports = None
        if t >= next_report - 1e-12:
            reports = {i + 1: float(plpf[i]) for i in range(n)}
            next_report += sc.lbc.report_period
        for t_deliver, value in channel_step(channel, mgcc, t, reports):
            p_avg[:] = value
            fresh_until[:] = t_deliver + stale_limit

        boundary = n_ticks
        if ev_idx < len(sc.events):
            boundary = min(boundary, max(k + 1, ev_ticks[ev_idx]))
        boundary = min(boundary, max(k + 1, _tick_ceil(next_report, dt_c)))
        nd = channel.next_deliver_time()
        if nd is not None:
            boundary = min(boundary, max(k + 1, _tick_ceil(nd, dt_c)))

        status, k_end = _run_chunk(
            k, boundary, n_sub, dt_c, dt_p,
            m_tz, b_tz, r_line, r_load, sc.v_dc_nominal, sc.c_dc,
            sc.r_dc_source,
            x, v_dc, xs, vcmd, sens,
            theta, vamp, omg, plpf, qlpf,
            vbuf, ibuf, bufpos, bufcnt, rs_v, rs_i,
            droop_cfg, vkp, vkr, ikp, ikr, pq_alpha,
            comp_on, warm_ticks, bpf_s, lpfd, voff, est_cfg,
            avi_on, r_v, avi_integ, p_avg, fresh_until, avi_cfg,
            out["v_c"], out["i_o"], out["v_dc"], out["p_lpf"], out["q_lpf"],
            out["r_v"], out["v_off_hat"], out["v_amp"])
        if status == 1:
            raise NonFiniteError("simulation state became non-finite",
                                 t=k_end * dt_c,
                                 snapshot={"x": x.copy(), "v_dc": v_dc.copy()})
        if status == 2:
            raise DcCollapseError("a DC link collapsed below half nominal",
                                  t=k_end * dt_c,
                                  snapshot={"v_dc": v_dc.copy()})
        k = boundary

    t_arr = np.arange(n_ticks + 1) * dt_c
    columns, metrics = _window_metrics(sc, t_arr, out)
    wall = time.perf_counter() - t_start_wall
    return RunArtifacts(
        scenario=sc, seed=seed_eff, decimate=dec, t=t_arr,
        v_c=out["v_c"], i_o=out["i_o"], v_dc=out["v_dc"],
        p_lpf=out["p_lpf"], q_lpf=out["q_lpf"], r_v=out["r_v"],
        v_off_hat=out["v_off_hat"], v_amp=out["v_amp"],
        messages=list(channel.log), metric_columns=columns, metrics=metrics,
        wall_time=wall)


def _window_metrics(sc: Scenario, t_arr, out):
    """Per-window waveform metrics over the whole run.

    Windows are five fundamental periods, back to back.  Pairwise
    columns (sharing error, circulating current) are only produced for
    the two-unit arrangement.
    """
    n = sc.n_units
    dt = sc.dt_control
    omega = sc.dgs[0].droop.omega0
    wt = round(5.0 * TWO_PI / omega / dt)
    n_windows = (len(t_arr) - 1) // wt
    units = range(1, n + 1)

    columns = ["t"]
    columns += [f"p{i}" for i in units] + [f"q{i}" for i in units]
    if n == 2:
        columns += ["sharing_error", "i_dc_cir", "i_ac_err_rms"]
    columns += [f"vdc{i}_ripple_w" for i in units]
    columns += [f"vdc{i}_ripple_2w" for i in units]
    columns += [f"thd_v{i}" for i in units]
    columns += [f"rv{i}" for i in units] + [f"voff_hat{i}" for i in units]
    metrics = {c: np.zeros(n_windows) for c in columns}

    for w in range(n_windows):
        ke = (w + 1) * wt
        sl = slice(ke - wt + 1, ke + 1)
        metrics["t"][w] = t_arr[ke]
        vw = [WaveformWindow(out["v_c"][i, sl], dt, omega) for i in range(n)]
        iw = [WaveformWindow(out["i_o"][i, sl], dt, omega) for i in range(n)]
        p = np.zeros(n)
        for i in range(n):
            pw = WaveformWindow(vw[i].samples * iw[i].samples, dt, omega)
            p[i], _ = fourier_bin(pw, 0)
            av, phv = fourier_bin(vw[i], 1)
            ai, phi = fourier_bin(iw[i], 1)
            metrics[f"p{i + 1}"][w] = p[i]
            metrics[f"q{i + 1}"][w] = 0.5 * av * ai * math.sin(phv - phi)
            dcw = WaveformWindow(out["v_dc"][i, sl], dt, omega)
            metrics[f"vdc{i + 1}_ripple_w"][w] = fourier_bin(dcw, 1)[0]
            metrics[f"vdc{i + 1}_ripple_2w"][w] = fourier_bin(dcw, 2)[0]
            metrics[f"thd_v{i + 1}"][w] = harmonic_distortion(vw[i])
            metrics[f"rv{i + 1}"][w] = out["r_v"][i, ke]
            metrics[f"voff_hat{i + 1}"][w] = out["v_off_hat"][i, ke]
        if n == 2:
            avg = 0.5 * (p[0] + p[1])
            metrics["sharing_error"][w] = (abs(p[0] - p[1]) / avg
                                           if avg > 0 else math.nan)
            i_dc, i_ac = circulating_current(iw[0], iw[1])
            metrics["i_dc_cir"][w] = i_dc
            metrics["i_ac_err_rms"][w] = i_ac
    return columns, metrics
