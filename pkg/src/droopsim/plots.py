"""Figure rendering for finished runs.

Every figure is written as an SVG next to the delimited output.  Traces
come straight from the recorded arrays; overlay curves come from the
already-computed window metrics, so the plots show exactly the numbers
the CSV files contain.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .engine import RunArtifacts
from .errors import IoError

__all__ = ["emit_plots"]

_MAX_POINTS = 20000


def _thin(t, n_samples):
    step = max(1, n_samples // _MAX_POINTS)
    return slice(0, n_samples, step)


def _new_fig(n_rows=1):
    fig, axes = plt.subplots(n_rows, 1, figsize=(9, 3.2 * n_rows),
                             constrained_layout=True, squeeze=False)
    for ax in axes[:, 0]:
        ax.grid(True, alpha=0.3)
    return fig, axes[:, 0]


def emit_plots(art: RunArtifacts, out_dir) -> list:
    """Render the standard figure set; returns the written paths."""
    if art.t.size < 2:
        raise IoError("run holds no samples to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n = art.n_units
    t = art.t
    sl = _thin(t, len(t))
    mt = art.metrics.get("t", np.array([]))
    written = []

    def save(fig, name):
        path = out_dir / name
        fig.savefig(path)
        plt.close(fig)
        written.append(path)

    # branch currents, full run and the last few cycles
    fig, (ax0, ax1) = _new_fig(2)
    for i in range(n):
        ax0.plot(t[sl], art.i_o[i, sl], lw=0.6, label=f"unit {i + 1}")
    ax0.set_ylabel("output current (A)")
    ax0.legend(loc="upper right")
    zoom = min(len(t) - 1, round(0.06 / art.scenario.dt_control))
    for i in range(n):
        ax1.plot(t[-zoom:], art.i_o[i, -zoom:], lw=1.0, label=f"unit {i + 1}")
    ax1.set_ylabel("final cycles (A)")
    ax1.set_xlabel("time (s)")
    save(fig, "output_currents.svg")

    if n == 2:
        fig, (ax,) = _new_fig(1)
        ax.plot(t[sl], art.i_o[0, sl] - art.i_o[1, sl], lw=0.6,
                color="tab:purple", label="i_o1 - i_o2")
        if mt.size:
            ax.plot(mt, art.metrics["i_dc_cir"], "k.-", ms=4,
                    label="window DC component")
        ax.set_xlabel("time (s)")
        ax.set_ylabel("circulating current (A)")
        ax.legend(loc="upper right")
        save(fig, "circulating_current.svg")

    fig, (ax0, ax1) = _new_fig(2)
    for i in range(n):
        ax0.plot(t[sl], art.p_lpf[i, sl], lw=0.9, label=f"unit {i + 1}")
    ax0.set_ylabel("filtered P (W)")
    ax0.legend(loc="lower right")
    if mt.size and "sharing_error" in art.metrics:
        ax1.plot(mt, 100.0 * art.metrics["sharing_error"], "k.-", ms=4)
    ax1.set_ylabel("sharing error (%)")
    ax1.set_xlabel("time (s)")
    save(fig, "power_sharing.svg")

    fig, (ax0, ax1) = _new_fig(2)
    for i in range(n):
        ax0.plot(t[sl], art.r_v[i, sl], lw=0.9, label=f"unit {i + 1}")
        ax1.plot(t[sl], art.v_off_hat[i, sl], lw=0.9, label=f"unit {i + 1}")
    for i, dg in enumerate(art.scenario.dgs):
        if dg.sensors.v.offset != 0.0:
            ax1.axhline(dg.sensors.v.offset, color="gray", ls="--", lw=0.8)
    ax0.set_ylabel("virtual resistance (ohm)")
    ax0.legend(loc="center right")
    ax1.set_ylabel("offset estimate (V)")
    ax1.set_xlabel("time (s)")
    save(fig, "adaptation.svg")

    fig, (ax0, ax1) = _new_fig(2)
    for i in range(n):
        ax0.plot(t[sl], art.v_dc[i, sl], lw=0.6, label=f"unit {i + 1}")
    ax0.set_ylabel("DC bus (V)")
    ax0.legend(loc="upper right")
    if mt.size:
        for i in range(n):
            ax1.plot(mt, art.metrics[f"vdc{i + 1}_ripple_w"], ".-", ms=4,
                     label=f"unit {i + 1}")
    ax1.set_ylabel("fundamental ripple (V)")
    ax1.set_xlabel("time (s)")
    ax1.legend(loc="upper right")
    save(fig, "dc_bus.svg")

    return written
