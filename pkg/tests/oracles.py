"""Independent reference calculations for the test suite.

Everything in here is derived straight from circuit laws or textbook
transfer functions, written without looking at the package internals, so
a test that compares simulator output against these functions is a real
cross-check and not a tautology.
"""

import numpy as np

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# resistive network with a shared load node

def dc_nodal(v_src, r_line, r_load):
    """Ideal DC sources behind line resistances feeding one load.

    Solves Kirchhoff's current law at the load node with a linear solve
    (one unknown, but kept in matrix form on purpose) and returns
    ``(v_load, i_branch)`` where ``i_branch[k]`` flows from source k into
    the node.
    """
    v_src = np.asarray(v_src, dtype=float)
    r_line = np.asarray(r_line, dtype=float)
    g = np.array([[np.sum(1.0 / r_line) + 1.0 / r_load]])
    b = np.array([np.sum(v_src / r_line)])
    v_load = np.linalg.solve(g, b)[0]
    return v_load, (v_src - v_load) / r_line


def ac_nodal_sources(e_phasors, r_line, r_load):
    """Same network as :func:`dc_nodal` but with complex phasor sources."""
    e = np.asarray(e_phasors, dtype=complex)
    r_line = np.asarray(r_line, dtype=float)
    g = np.array([[np.sum(1.0 / r_line) + 1.0 / r_load]], dtype=complex)
    b = np.array([np.sum(e / r_line)], dtype=complex)
    v_load = np.linalg.solve(g, b)[0]
    return v_load, (e - v_load) / r_line


def ac_nodal_bridge(vb_phasors, omega, l_f, c_f, r_line, r_load):
    """Full filter network driven by ideal bridge phasors.

    Each unit is a source ``vb`` behind the filter inductance, with the
    filter capacitor at its output node and a line resistance to the
    common load.  Unknowns are the n capacitor voltages plus the load
    voltage; returns ``(vc, v_load, i_o)``.
    """
    vb = np.asarray(vb_phasors, dtype=complex)
    r_line = np.asarray(r_line, dtype=float)
    n = vb.size
    y_l = 1.0 / (1j * omega * l_f)
    y_c = 1j * omega * c_f
    a = np.zeros((n + 1, n + 1), dtype=complex)
    b = np.zeros(n + 1, dtype=complex)
    for k in range(n):
        a[k, k] = y_l + y_c + 1.0 / r_line[k]
        a[k, n] = -1.0 / r_line[k]
        a[n, k] = -1.0 / r_line[k]
        b[k] = vb[k] * y_l
    a[n, n] = np.sum(1.0 / r_line) + 1.0 / r_load
    x = np.linalg.solve(a, b)
    vc, v_load = x[:n], x[n]
    return vc, v_load, (vc - v_load) / r_line


def droop_fixed_point(v0, m_coef, r_line, r_load, tol=1e-12, max_iter=500):
    """Self-consistent droop amplitudes for units regulating their own
    capacitor voltage (zero tracking error at the fundamental).

    Iterates E_k = v0 - m * P_k with P_k from the phasor network until
    the amplitudes stop moving.  All sources share phase zero, which is
    the in-phase approximation valid for P-dominant resistive lines.
    Returns ``(e_amps, p_units)``.
    """
    r_line = np.asarray(r_line, dtype=float)
    e = np.full(r_line.size, float(v0))
    for _ in range(max_iter):
        _, i_o = ac_nodal_sources(e, r_line, r_load)
        p = 0.5 * np.real(e * np.conj(i_o))
        e_new = v0 - m_coef * p
        if np.max(np.abs(e_new - e)) < tol:
            return e_new, 0.5 * np.real(e_new * np.conj(i_o))
        e = e_new
    raise RuntimeError("droop fixed point did not converge")


# ---------------------------------------------------------------------------
# analog transfer functions

def p3r_analog_response(omega_eval, kp, kr, omega0):
    """Eq-form proportional plus resonant response at ``omega_eval``."""
    s = 1j * np.asarray(omega_eval, dtype=float)
    h = np.full(s.shape, complex(kp)) if s.shape else complex(kp)
    for order, gain in zip((1, 3, 5), kr):
        h = h + 2.0 * gain * s / (s * s + (order * omega0) ** 2)
    return h


def bpf_analog_response(omega_eval, omega_b, omega0):
    """Second-order band-pass prototype response."""
    s = 1j * np.asarray(omega_eval, dtype=float)
    return omega_b * s / (s * s + omega_b * s + omega0 * omega0)


def sine_fit(t, x, omega):
    """Least-squares fit x ~ a*sin(omega t) + b*cos(omega t) + c.

    Returns ``(amp, phase, offset)`` with the convention
    x ~ amp * sin(omega t + phase) + offset.
    """
    t = np.asarray(t, dtype=float)
    basis = np.column_stack([np.sin(omega * t), np.cos(omega * t),
                             np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(basis, np.asarray(x, dtype=float), rcond=None)
    a, b, c = coef
    return np.hypot(a, b), np.arctan2(b, a), c


def multi_sine_fit(t, x, omegas):
    """Joint least-squares fit of sin/cos pairs at several frequencies.

    Returns one complex phasor per frequency (sin convention, so the
    component is Im(P exp(j w t)) = |P| sin(wt + arg P)).  With a window
    spanning whole cycles of every frequency the columns are orthogonal
    and the separation is exact, which is what makes this usable on a
    filter that rings at its own resonances while being driven at a
    nearby probe frequency.
    """
    t = np.asarray(t, dtype=float)
    cols = [np.ones_like(t)]
    for w in omegas:
        cols += [np.sin(w * t), np.cos(w * t)]
    coef, *_ = np.linalg.lstsq(np.column_stack(cols),
                               np.asarray(x, dtype=float), rcond=None)
    return [complex(coef[1 + 2 * k], coef[2 + 2 * k])
            for k in range(len(omegas))]


def measure_discrete_response(filter_fn, omega, dt, n_settle_periods=40,
                              n_fit_periods=20):
    """Empirical frequency response of a causal single-in single-out
    filter ``y = filter_fn(x_sample)`` stepped at ``dt``.

    Drives a unit sine, discards the settling stretch, sine-fits the
    tail, and returns the complex gain.
    """
    period = TWO_PI / omega
    n_settle = int(round(n_settle_periods * period / dt))
    n_fit = int(round(n_fit_periods * period / dt))
    n = n_settle + n_fit
    t = np.arange(n) * dt
    y = np.empty(n)
    for k in range(n):
        y[k] = filter_fn(np.sin(omega * t[k]))
    amp, phase, _ = sine_fit(t[n_settle:], y[n_settle:], omega)
    return amp * np.exp(1j * phase)


# ---------------------------------------------------------------------------
# instantaneous power closed forms

def power_closed_forms(v_amp, i_amp, phi, v_dc=0.0, i_dc=0.0):
    """Frequency content of p = v*i for offset sinusoids.

    v = v_dc + v_amp sin(wt), i = i_dc + i_amp sin(wt - phi).  Returns
    ``(p_dc, p_omega_amp, p_2omega_amp)``.
    """
    p_dc = 0.5 * v_amp * i_amp * np.cos(phi) + v_dc * i_dc
    # the two fundamental-frequency terms add as phasors referenced to sin
    ph = v_dc * i_amp * np.exp(-1j * phi) + i_dc * v_amp
    return p_dc, abs(ph), 0.5 * v_amp * i_amp


def pq_closed_forms(v_amp, i_amp, phi):
    """Average P and Q for v = V sin(wt), i = I sin(wt - phi), with the
    lagging-current-positive Q convention."""
    return 0.5 * v_amp * i_amp * np.cos(phi), 0.5 * v_amp * i_amp * np.sin(phi)


# ---------------------------------------------------------------------------
# DC bus

def dc_bus_equilibrium(v_nominal, r_source, p_draw):
    """Steady bus voltage solving v (v_nom - v) / r = p (largest root)."""
    disc = v_nominal * v_nominal - 4.0 * r_source * p_draw
    if disc < 0:
        raise ValueError("source cannot supply that power")
    return 0.5 * (v_nominal + np.sqrt(disc))


def dc_bus_ripple_amp(p_ripple_amp, omega_ripple, v_bar, r_source, c_dc):
    """Bus voltage ripple amplitude for a power ripple at one frequency.

    Small-signal: the bus looks like r_source parallel with the
    capacitor, driven by the ripple current p~/v_bar.
    """
    z = r_source / np.hypot(1.0, omega_ripple * r_source * c_dc)
    return p_ripple_amp / v_bar * z
