"""Averaged electrical model of parallel inverters on a shared load bus.

Each unit is an ideal bridge behind an LC filter, tied to the common load
node through its own line resistance.  The bridge draws power from a DC
link capacitor that is fed from a stiff source through a series
resistance, so pulsating output power shows up as ripple on the DC bus.

The LC + line network is linear, so the continuous dynamics are advanced
with a trapezoidal (Tustin) discretisation whose matrices are built once
per (parameters, dt) pair.  The DC link has a 1/v nonlinearity and gets a
Heun step instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .errors import DcCollapseError, NonFiniteError

__all__ = [
    "PlantParams",
    "PlantState",
    "solve_load_node",
    "step_plant",
    "step_dc_link",
    "lc_step_matrices",
]


@dataclass(frozen=True)
class PlantParams:
    """Electrical constants for the whole plant.

    ``r_line`` has one entry per unit; its length fixes the number of
    inverters everywhere else.
    """

    l_f: float = 0.5e-3
    c_f: float = 15e-6
    r_line: tuple = (0.22, 0.22)
    r_load: float = 14.0
    v_dc_nominal: float = 250.0
    c_dc: float = 2e-3
    r_dc_source: float = 0.5
    dt_plant: float = 5e-6

    def __post_init__(self):
        if self.l_f <= 0 or self.c_f <= 0:
            raise ValueError("filter inductance and capacitance must be positive")
        if self.r_load <= 0 or self.c_dc <= 0 or self.r_dc_source <= 0:
            raise ValueError("load and DC-link parameters must be positive")
        if self.v_dc_nominal <= 0 or self.dt_plant <= 0:
            raise ValueError("v_dc_nominal and dt_plant must be positive")
        if len(self.r_line) < 1 or any(r <= 0 for r in self.r_line):
            raise ValueError("every line resistance must be positive")
        object.__setattr__(self, "r_line", tuple(float(r) for r in self.r_line))

    @property
    def n_units(self) -> int:
        return len(self.r_line)


@dataclass
class PlantState:
    """Instantaneous electrical state.

    ``x`` interleaves per-unit inductor current and capacitor voltage as
    ``[i_l1, v_c1, i_l2, v_c2, ...]``.  ``v_load`` and ``i_o`` are the
    algebraic node solution for the current ``x``.
    """

    x: np.ndarray
    v_dc: np.ndarray
    v_load: float
    i_o: np.ndarray

    @classmethod
    def initial(cls, params: PlantParams) -> "PlantState":
        n = params.n_units
        x = np.zeros(2 * n)
        v_dc = np.full(n, float(params.v_dc_nominal))
        return cls(x=x, v_dc=v_dc, v_load=0.0, i_o=np.zeros(n))

    @property
    def i_l(self) -> np.ndarray:
        return self.x[0::2]

    @property
    def v_c(self) -> np.ndarray:
        return self.x[1::2]


@njit(cache=True)
def _node_voltage(x, r_line, r_load):
    n = r_line.shape[0]
    num = 0.0
    den = 1.0 / r_load
    for i in range(n):
        num += x[2 * i + 1] / r_line[i]
        den += 1.0 / r_line[i]
    return num / den


@njit(cache=True)
def _branch_currents(x, r_line, v_load, out):
    for i in range(r_line.shape[0]):
        out[i] = (x[2 * i + 1] - v_load) / r_line[i]


@njit(cache=True)
def _lc_substep(m_tz, b_tz, x, u, x_new):
    m = x.shape[0]
    nu = u.shape[0]
    for r in range(m):
        acc = 0.0
        for c in range(m):
            acc += m_tz[r, c] * x[c]
        for c in range(nu):
            acc += b_tz[r, c] * u[c]
        x_new[r] = acc


@njit(cache=True)
def _dc_rate(v, p_out, v_nom, c_dc, r_s):
    return ((v_nom - v) / r_s - p_out / v) / c_dc


@njit(cache=True)
def _dc_substep(v, p_out, v_nom, c_dc, r_s, dt):
    # Heun step; the bus never legitimately approaches zero, the floor
    # just keeps the 1/v term finite until the collapse check fires.
    k1 = _dc_rate(v, p_out, v_nom, c_dc, r_s)
    v_pred = v + dt * k1
    if v_pred < 1e-3:
        v_pred = 1e-3
    k2 = _dc_rate(v_pred, p_out, v_nom, c_dc, r_s)
    return v + 0.5 * dt * (k1 + k2)


@lru_cache(maxsize=64)
def _cached_matrices(l_f, c_f, r_line, r_load, dt):
    n = len(r_line)
    m = 2 * n
    a = np.zeros((m, m))
    b = np.zeros((m, n))
    den = 1.0 / r_load + sum(1.0 / r for r in r_line)
    for i in range(n):
        a[2 * i, 2 * i + 1] = -1.0 / l_f
        b[2 * i, i] = 1.0 / l_f
        a[2 * i + 1, 2 * i] = 1.0 / c_f
        for j in range(n):
            share = (1.0 / r_line[j]) / den
            a[2 * i + 1, 2 * j + 1] += share / (r_line[i] * c_f)
        a[2 * i + 1, 2 * i + 1] += -1.0 / (r_line[i] * c_f)
    eye = np.eye(m)
    left = np.linalg.inv(eye - 0.5 * dt * a)
    m_tz = left @ (eye + 0.5 * dt * a)
    b_tz = left @ (b * dt)
    return m_tz, b_tz


def lc_step_matrices(params: PlantParams, dt: float):
    """Trapezoidal one-step matrices (M, B) so x' = M x + B u.

    Cached, so repeated calls with identical parameters hand back the
    same arrays; callers must not write into them.
    """
    return _cached_matrices(params.l_f, params.c_f, params.r_line,
                            params.r_load, float(dt))


def solve_load_node(v_c, params: PlantParams):
    """Voltage divider at the shared load node.

    Given the per-unit capacitor voltages, returns ``(v_load, i_o)``
    where ``i_o[i]`` flows from unit i into the node.  Purely algebraic;
    the same arithmetic runs inside the stepping kernels.
    """
    v_c = np.asarray(v_c, dtype=float)
    if v_c.shape != (params.n_units,):
        raise ValueError(f"expected {params.n_units} capacitor voltages, got {v_c.shape}")
    r = np.asarray(params.r_line)
    x = np.zeros(2 * params.n_units)
    x[1::2] = v_c
    v_load = _node_voltage(x, r, params.r_load)
    i_o = np.empty(params.n_units)
    _branch_currents(x, r, v_load, i_o)
    return float(v_load), i_o


def step_plant(state: PlantState, v_bridge: np.ndarray, params: PlantParams,
               dt: float | None = None, t: float | None = None) -> PlantState:
    """Advance the LC + line network by one sub-step.

    ``v_bridge`` is the commanded bridge voltage per unit; it is clamped
    to the available DC-link voltage before being applied.  Returns a new
    state, leaving the input untouched.  Raises :class:`NonFiniteError`
    if the update produces NaN or infinity.
    """
    if dt is None:
        dt = params.dt_plant
    m_tz, b_tz = lc_step_matrices(params, dt)
    u = np.asarray(v_bridge, dtype=float).copy()
    np.clip(u, -state.v_dc, state.v_dc, out=u)
    x_new = np.empty_like(state.x)
    _lc_substep(m_tz, b_tz, state.x, u, x_new)
    if not np.all(np.isfinite(x_new)):
        raise NonFiniteError("plant state became non-finite", t=t,
                             snapshot={"x": state.x.copy(), "u": u})
    r = np.asarray(params.r_line)
    v_load = _node_voltage(x_new, r, params.r_load)
    i_o = np.empty(params.n_units)
    _branch_currents(x_new, r, v_load, i_o)
    return PlantState(x=x_new, v_dc=state.v_dc.copy(), v_load=float(v_load), i_o=i_o)


def step_dc_link(state: PlantState, p_out: np.ndarray, params: PlantParams,
                 dt: float | None = None, t: float | None = None) -> PlantState:
    """Advance each DC-link capacitor by one sub-step.

    ``p_out[i]`` is the power the bridge of unit i draws during the step.
    Raises :class:`DcCollapseError` once a bus sags below half nominal
    and :class:`NonFiniteError` on numerical blow-up.
    """
    if dt is None:
        dt = params.dt_plant
    p_out = np.asarray(p_out, dtype=float)
    v_new = state.v_dc.copy()
    for i in range(params.n_units):
        v_new[i] = _dc_substep(v_new[i], p_out[i], params.v_dc_nominal,
                               params.c_dc, params.r_dc_source, dt)
    if not np.all(np.isfinite(v_new)):
        raise NonFiniteError("DC-link voltage became non-finite", t=t,
                             snapshot={"v_dc": state.v_dc.copy(), "p_out": p_out})
    low = v_new < 0.5 * params.v_dc_nominal
    if np.any(low):
        i = int(np.argmax(low))
        raise DcCollapseError(
            f"DC link {i + 1} collapsed to {v_new[i]:.1f} V "
            f"(half nominal is {0.5 * params.v_dc_nominal:.1f} V)",
            t=t, snapshot={"v_dc": v_new, "p_out": p_out})
    return PlantState(x=state.x.copy(), v_dc=v_new, v_load=state.v_load,
                      i_o=state.i_o.copy())
