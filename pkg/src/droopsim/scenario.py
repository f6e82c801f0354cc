"""Scenario definitions: what to simulate, for how long, with which
errors injected and which corrections active.

A scenario can come from a small sectioned text file or from the
compiled-in catalogue.  The catalogue entries are built as objects, not
parsed from strings, so the regression suite pins behaviour that cannot
drift with the file format.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .avi import AviPiParams, LbcParams
from .control import TWO_PI, DroopParams, P3rGains
from .errors import ScenarioParseError, ScenarioValidationError
from .offsetcomp import EstimatorParams
from .plant import PlantParams
from .sensing import SensorModel, SensorSuite

__all__ = [
    "DgConfig",
    "Event",
    "Scenario",
    "EVENT_ACTIONS",
    "builtin_scenarios",
    "load_scenario",
    "parse_scenario_text",
    "validate_scenario",
]

EVENT_ACTIONS = (
    "enable_avi",
    "disable_avi",
    "enable_offset_comp",
    "disable_offset_comp",
    "set_load",
    "set_line",
)


@dataclass(frozen=True)
class DgConfig:
    """Everything specific to one inverter."""

    r_line: float = 0.22
    droop: DroopParams = field(default_factory=DroopParams)
    v_gains: P3rGains = field(default_factory=lambda: P3rGains(0.2, (50.0, 20.0, 20.0)))
    i_gains: P3rGains = field(default_factory=lambda: P3rGains(4.0, (200.0, 0.0, 0.0)))
    pq_cutoff_hz: float = 5.0
    sensors: SensorSuite = field(default_factory=SensorSuite)
    est: EstimatorParams = field(default_factory=EstimatorParams)
    est_initial: float = 0.0
    avi: AviPiParams = field(default_factory=AviPiParams)


@dataclass(frozen=True)
class Event:
    """A timed change applied at the control tick nearest ``time``."""

    time: float
    action: str
    args: tuple = ()


@dataclass(frozen=True)
class Scenario:
    name: str
    dgs: tuple
    duration: float = 2.0
    dt_control: float = 5e-5
    dt_plant: float = 5e-6
    seed: int = 1234
    decimate: int = 10
    avi_enabled: bool = False
    offset_comp_enabled: bool = False
    l_f: float = 0.5e-3
    c_f: float = 15e-6
    r_load: float = 14.0
    v_dc_nominal: float = 250.0
    c_dc: float = 2e-3
    r_dc_source: float = 0.5
    lbc: LbcParams = field(default_factory=LbcParams)
    events: tuple = ()

    @property
    def n_units(self) -> int:
        return len(self.dgs)

    def plant_params(self) -> PlantParams:
        return PlantParams(
            l_f=self.l_f, c_f=self.c_f,
            r_line=tuple(dg.r_line for dg in self.dgs),
            r_load=self.r_load, v_dc_nominal=self.v_dc_nominal,
            c_dc=self.c_dc, r_dc_source=self.r_dc_source,
            dt_plant=self.dt_plant)

    @property
    def n_ticks(self) -> int:
        return round(self.duration / self.dt_control)


def validate_scenario(sc: Scenario) -> None:
    """Raise :class:`ScenarioValidationError` on anything unrunnable."""

    def bad(key, reason):
        raise ScenarioValidationError(key, reason)

    if sc.duration <= 0:
        bad("duration", f"must be positive, got {sc.duration}")
    if sc.dt_control <= 0 or sc.dt_plant <= 0:
        bad("dt_control/dt_plant", "time steps must be positive")
    ratio = sc.dt_control / sc.dt_plant
    if abs(ratio - round(ratio)) > 1e-9 * ratio or round(ratio) < 1:
        bad("dt_plant", f"dt_control/dt_plant = {ratio} is not a whole number")
    if sc.n_ticks < 1:
        bad("duration", "shorter than one control period")
    if sc.decimate < 1:
        bad("decimate", "must be at least 1")
    if sc.seed < 0:
        bad("seed", "must be non-negative")
    if not sc.dgs:
        bad("dg", "at least one unit must be defined")
    for k, v in (("l_f", sc.l_f), ("c_f", sc.c_f), ("r_load", sc.r_load),
                 ("v_dc_nominal", sc.v_dc_nominal), ("c_dc", sc.c_dc),
                 ("r_dc_source", sc.r_dc_source)):
        if v <= 0:
            bad(k, f"must be positive, got {v}")
    for idx, dg in enumerate(sc.dgs, 1):
        if dg.r_line <= 0:
            bad(f"dg.{idx}.r_line", f"must be positive, got {dg.r_line}")
        if dg.pq_cutoff_hz <= 0:
            bad(f"dg.{idx}.pq_cutoff_hz", "must be positive")
        quarter = 1.0 / (4.0 * (dg.droop.omega0 / TWO_PI) * sc.dt_control)
        if round(quarter) < 1:
            bad(f"dg.{idx}", "quarter period shorter than one control tick")
    last_t = -math.inf
    for ev in sc.events:
        if ev.action not in EVENT_ACTIONS:
            bad("events", f"unknown action {ev.action!r}")
        if not (0.0 <= ev.time <= sc.duration):
            bad("events", f"event at t={ev.time} outside [0, {sc.duration}]")
        if ev.time < last_t:
            bad("events", "events must be sorted by time")
        last_t = ev.time
        if ev.action == "set_load":
            if len(ev.args) != 1 or ev.args[0] <= 0:
                bad("events", "set_load needs one positive resistance")
        elif ev.action == "set_line":
            if len(ev.args) != 2:
                bad("events", "set_line needs a unit id and a resistance")
            unit, r = ev.args
            if int(unit) < 1 or int(unit) > len(sc.dgs):
                bad("events", f"set_line unit {unit} does not exist")
            if r <= 0:
                bad("events", f"set_line resistance must be positive, got {r}")
        elif ev.args:
            bad("events", f"{ev.action} takes no arguments")


# ---------------------------------------------------------------------------
# compiled-in catalogue

def _offset_dg(r_line: float, v_offset: float = 0.0) -> DgConfig:
    return DgConfig(r_line=r_line,
                    sensors=SensorSuite(v=SensorModel(offset=v_offset)))


def builtin_scenarios() -> dict:
    """The canonical runs the regression suite is written against."""
    mismatch = (0.44, 0.22)
    scenarios = [
        Scenario(
            name="balanced",
            dgs=(_offset_dg(0.22), _offset_dg(0.22)),
            duration=2.0),
        Scenario(
            name="mismatch_baseline",
            dgs=(_offset_dg(mismatch[0], -5.0), _offset_dg(mismatch[1])),
            duration=3.0),
        Scenario(
            name="mismatch_compensated",
            dgs=(_offset_dg(mismatch[0], -5.0), _offset_dg(mismatch[1])),
            duration=8.0,
            avi_enabled=True,
            offset_comp_enabled=True),
        Scenario(
            name="avi_engage",
            dgs=(_offset_dg(mismatch[0]), _offset_dg(mismatch[1])),
            duration=7.0,
            events=(Event(2.0, "enable_avi"),)),
        Scenario(
            name="offset_comp_engage",
            dgs=(_offset_dg(mismatch[0], -5.0), _offset_dg(mismatch[1])),
            duration=10.0,
            events=(Event(3.0, "enable_offset_comp"),)),
    ]
    return {sc.name: sc for sc in scenarios}


# ---------------------------------------------------------------------------
# text format

_BOOL_WORDS = {"on": True, "true": True, "yes": True, "1": True,
               "off": False, "false": False, "no": False, "0": False}


def _conv_float(key, val):
    try:
        return float(val)
    except ValueError:
        raise ScenarioValidationError(key, f"{val!r} is not a number") from None


def _conv_int(key, val):
    try:
        return int(val)
    except ValueError:
        raise ScenarioValidationError(key, f"{val!r} is not an integer") from None


def _conv_bool(key, val):
    try:
        return _BOOL_WORDS[val.lower()]
    except KeyError:
        raise ScenarioValidationError(key, f"{val!r} is not on/off") from None


_SIMULATION_KEYS = {
    "duration": _conv_float, "dt_control": _conv_float, "dt_plant": _conv_float,
    "seed": _conv_int, "decimate": _conv_int,
    "avi": _conv_bool, "offset_comp": _conv_bool,
}
_PLANT_KEYS = {
    "l_f": _conv_float, "c_f": _conv_float, "r_load": _conv_float,
    "v_dc_nominal": _conv_float, "c_dc": _conv_float, "r_dc_source": _conv_float,
}
_LBC_KEYS = {
    "report_period": _conv_float, "latency": _conv_float,
    "drop_probability": _conv_float, "stale_periods": _conv_int,
}
_DG_FLOAT_KEYS = (
    "r_line", "v0", "f0", "droop_m", "droop_n",
    "vloop_kp", "vloop_kr1", "vloop_kr3", "vloop_kr5",
    "iloop_kp", "iloop_kr1", "iloop_kr3", "iloop_kr5",
    "pq_cutoff_hz",
    "v_offset", "v_scale", "i_inv_offset", "i_inv_scale",
    "i_o_offset", "i_o_scale", "v_dc_offset", "v_dc_scale",
    "est_bpf_bandwidth_hz", "est_lpf_cutoff_hz", "est_gain", "est_max",
    "est_settle_time", "est_carrier_trim", "est_initial",
    "avi_kp", "avi_ki", "avi_rv_min", "avi_rv_max", "avi_sign",
)


def parse_scenario_text(text: str, name: str = "custom") -> Scenario:
    """Parse the sectioned ``key = value`` scenario format.

    Raises :class:`ScenarioParseError` for malformed lines and
    :class:`ScenarioValidationError` for unknown or unusable content.
    The returned scenario has already passed :func:`validate_scenario`.
    """
    sim, plant, lbc = {}, {}, {}
    dgs: dict[int, dict] = {}
    events = []
    section = None
    store = None

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioParseError(lineno, "unterminated section header")
            sec = line[1:-1].strip().lower()
            if sec == "simulation":
                section, store = sec, sim
            elif sec == "plant":
                section, store = sec, plant
            elif sec == "lbc":
                section, store = sec, lbc
            elif sec == "events":
                section, store = sec, None
            elif sec.startswith("dg."):
                try:
                    unit = int(sec[3:])
                except ValueError:
                    raise ScenarioParseError(lineno, f"bad unit id in [{sec}]") from None
                if unit < 1:
                    raise ScenarioParseError(lineno, "unit ids start at 1")
                section, store = sec, dgs.setdefault(unit, {})
            else:
                raise ScenarioValidationError(sec, "unknown section")
            continue
        if section is None:
            raise ScenarioParseError(lineno, "content before any [section]")
        if section == "events":
            toks = line.split()
            if len(toks) < 2:
                raise ScenarioParseError(lineno, "event needs a time and an action")
            try:
                t = float(toks[0])
            except ValueError:
                raise ScenarioParseError(lineno, f"event time {toks[0]!r} is not a number") from None
            args = []
            for tok in toks[2:]:
                try:
                    args.append(float(tok))
                except ValueError:
                    raise ScenarioParseError(lineno, f"event argument {tok!r} is not a number") from None
            events.append(Event(t, toks[1], tuple(args)))
            continue
        if "=" not in line:
            raise ScenarioParseError(lineno, "expected key = value")
        key, _, val = line.partition("=")
        key = key.strip().lower()
        val = val.strip()
        if not key or not val:
            raise ScenarioParseError(lineno, "empty key or value")
        if key in store:
            raise ScenarioParseError(lineno, f"duplicate key {key!r} in [{section}]")
        store[key] = val

    return _assemble(name, sim, plant, lbc, dgs, events)


def _take(d, key, conv, default):
    if key not in d:
        return default
    return conv(key, d.pop(key))


def _reject_leftovers(section, d):
    if d:
        key = sorted(d)[0]
        raise ScenarioValidationError(f"{section}.{key}", "unknown key")


def _assemble(name, sim, plant, lbc, dgs, events) -> Scenario:
    if not dgs:
        raise ScenarioValidationError("dg", "no [dg.N] sections defined")
    ids = sorted(dgs)
    if ids != list(range(1, len(ids) + 1)):
        raise ScenarioValidationError("dg", f"unit ids {ids} are not 1..{len(ids)}")

    dg_cfgs = []
    for unit in ids:
        d = dgs[unit]
        prefix = f"dg.{unit}"

        def f(key, default):
            if key not in d:
                return default
            return _conv_float(f"{prefix}.{key}", d.pop(key))

        k_demod_raw = d.pop("est_k_demod", None)
        if k_demod_raw is None or k_demod_raw.lower() == "auto":
            k_demod = None
        else:
            k_demod = _conv_float(f"{prefix}.est_k_demod", k_demod_raw)
        try:
            cfg = DgConfig(
                r_line=f("r_line", 0.22),
                droop=DroopParams(
                    v0=f("v0", 200.0),
                    omega0=TWO_PI * f("f0", 50.0),
                    m=f("droop_m", 1e-3),
                    n=f("droop_n", 2.5e-4)),
                v_gains=P3rGains(f("vloop_kp", 0.2),
                                 (f("vloop_kr1", 50.0), f("vloop_kr3", 20.0),
                                  f("vloop_kr5", 20.0))),
                i_gains=P3rGains(f("iloop_kp", 4.0),
                                 (f("iloop_kr1", 200.0), f("iloop_kr3", 0.0),
                                  f("iloop_kr5", 0.0))),
                pq_cutoff_hz=f("pq_cutoff_hz", 5.0),
                sensors=SensorSuite(
                    v=SensorModel(f("v_offset", 0.0), f("v_scale", 1.0)),
                    i_inv=SensorModel(f("i_inv_offset", 0.0), f("i_inv_scale", 1.0)),
                    i_o=SensorModel(f("i_o_offset", 0.0), f("i_o_scale", 1.0)),
                    v_dc=SensorModel(f("v_dc_offset", 0.0), f("v_dc_scale", 1.0))),
                est=EstimatorParams(
                    bpf_bandwidth_hz=f("est_bpf_bandwidth_hz", 10.0),
                    lpf_cutoff_hz=f("est_lpf_cutoff_hz", 2.0),
                    k_est=f("est_gain", 20.0),
                    v_off_max=f("est_max", 20.0),
                    settle_time=f("est_settle_time", 0.5),
                    k_demod=k_demod,
                    carrier_trim=f("est_carrier_trim", 0.0)),
                est_initial=f("est_initial", 0.0),
                avi=AviPiParams(
                    kp=f("avi_kp", 1e-4), ki=f("avi_ki", 2e-3),
                    rv_min=f("avi_rv_min", -0.1), rv_max=f("avi_rv_max", 1.0),
                    sign=f("avi_sign", -1.0)))
        except ValueError as exc:
            raise ScenarioValidationError(prefix, str(exc)) from None
        _reject_leftovers(prefix, d)
        dg_cfgs.append(cfg)

    try:
        sc = Scenario(
            name=name,
            dgs=tuple(dg_cfgs),
            duration=_take(sim, "duration", _conv_float, 2.0),
            dt_control=_take(sim, "dt_control", _conv_float, 5e-5),
            dt_plant=_take(sim, "dt_plant", _conv_float, 5e-6),
            seed=_take(sim, "seed", _conv_int, 1234),
            decimate=_take(sim, "decimate", _conv_int, 10),
            avi_enabled=_take(sim, "avi", _conv_bool, False),
            offset_comp_enabled=_take(sim, "offset_comp", _conv_bool, False),
            l_f=_take(plant, "l_f", _conv_float, 0.5e-3),
            c_f=_take(plant, "c_f", _conv_float, 15e-6),
            r_load=_take(plant, "r_load", _conv_float, 14.0),
            v_dc_nominal=_take(plant, "v_dc_nominal", _conv_float, 250.0),
            c_dc=_take(plant, "c_dc", _conv_float, 2e-3),
            r_dc_source=_take(plant, "r_dc_source", _conv_float, 0.5),
            lbc=LbcParams(
                report_period=_take(lbc, "report_period", _conv_float, 0.1),
                latency=_take(lbc, "latency", _conv_float, 0.01),
                drop_probability=_take(lbc, "drop_probability", _conv_float, 0.0),
                stale_periods=_take(lbc, "stale_periods", _conv_int, 5)),
            events=tuple(sorted(events, key=lambda e: e.time)))
    except ValueError as exc:
        raise ScenarioValidationError("scenario", str(exc)) from None
    _reject_leftovers("simulation", sim)
    _reject_leftovers("plant", plant)
    _reject_leftovers("lbc", lbc)
    validate_scenario(sc)
    return sc


def load_scenario(path) -> Scenario:
    """Read and validate a scenario file; the name is the file stem."""
    from pathlib import Path
    p = Path(path)
    return parse_scenario_text(p.read_text(), name=p.stem)
