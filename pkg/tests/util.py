"""Small harnesses shared between test modules (these drive the package,
unlike oracles.py which must stay independent of it)."""

import numpy as np

from droopsim import PlantParams, PlantState, step_plant


def run_open_loop(r_line, amps, phases, omega, t_end, dt=5e-6,
                  l_f=0.5e-3, c_f=15e-6, r_load=14.0):
    """Drive the plant with fixed sinusoidal bridge commands.

    No control loop at all: the bridge of unit k outputs
    ``amps[k] * sin(omega t + phases[k])`` and the DC links are left
    untouched.  Returns ``(t, v_c, i_o)`` sampled at every step.
    """
    params = PlantParams(l_f=l_f, c_f=c_f, r_line=tuple(r_line),
                         r_load=r_load)
    state = PlantState.initial(params)
    amps = np.asarray(amps, dtype=float)
    phases = np.asarray(phases, dtype=float)
    n = int(round(t_end / dt))
    v_c = np.empty((params.n_units, n))
    i_o = np.empty((params.n_units, n))
    for k in range(n):
        vb = amps * np.sin(omega * (k * dt) + phases)
        state = step_plant(state, vb, params, dt=dt)
        v_c[:, k] = state.v_c
        i_o[:, k] = state.i_o
    return np.arange(1, n + 1) * dt, v_c, i_o
