"""Desk-scale simulator for parallel droop-controlled single-phase
inverters sharing an islanded AC bus.

The package answers one question end to end: how do line-impedance
mismatch and voltage-sensor offsets corrupt current sharing between
paralleled units, and how well do adaptive virtual impedance and
DC-ripple-based offset compensation clean that up.
"""
from .analysis import (PowerDecomposition, WaveformWindow, circulating_current,
                       decompose_power, fourier_bin, harmonic_distortion,
                       sharing_error)
from .avi import (AviPiParams, AviPiState, LbcChannel, LbcParams, Message,
                  MgccState, avi_pi_step, channel_step, mgcc_average,
                  virtual_drop)
from .control import (DroopParams, InverterController, P3rGains, PqState,
                      compute_pq, controller_step, droop_update, p3r_state,
                      p3r_step)
from .engine import RunArtifacts, run_scenario
from .errors import (DcCollapseError, IoError, NoReportsError, NonFiniteError,
                     NotWarmedUpError, ScenarioParseError,
                     ScenarioValidationError, SimulationError,
                     WindowMismatchError, ZeroTotalPowerError)
from .offsetcomp import (BandpassFilter, EstimatorParams, OffsetEstimator,
                         bpf_step, dc_ripple_demod_params, estimator_step)
from .plant import (PlantParams, PlantState, lc_step_matrices, solve_load_node,
                    step_dc_link, step_plant)
from .scenario import (DgConfig, Event, Scenario, builtin_scenarios,
                       load_scenario, parse_scenario_text, validate_scenario)
from .sensing import SensorModel, SensorSuite, apply_sensor

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # plant
    "PlantParams", "PlantState", "solve_load_node", "step_plant",
    "step_dc_link", "lc_step_matrices",
    # sensing
    "SensorModel", "SensorSuite", "apply_sensor",
    # control
    "DroopParams", "P3rGains", "PqState", "InverterController",
    "droop_update", "compute_pq", "p3r_step", "p3r_state", "controller_step",
    # offset compensation
    "BandpassFilter", "OffsetEstimator", "EstimatorParams", "bpf_step",
    "estimator_step", "dc_ripple_demod_params",
    # adaptive virtual impedance
    "AviPiParams", "AviPiState", "LbcParams", "LbcChannel", "Message",
    "MgccState", "mgcc_average", "channel_step", "avi_pi_step",
    "virtual_drop",
    # analysis
    "WaveformWindow", "PowerDecomposition", "fourier_bin", "decompose_power",
    "circulating_current", "sharing_error", "harmonic_distortion",
    # scenarios and running
    "Scenario", "DgConfig", "Event", "builtin_scenarios", "load_scenario",
    "parse_scenario_text", "validate_scenario", "RunArtifacts", "run_scenario",
    # errors
    "SimulationError", "NonFiniteError", "DcCollapseError", "NotWarmedUpError",
    "WindowMismatchError", "ZeroTotalPowerError", "NoReportsError",
    "ScenarioParseError", "ScenarioValidationError", "IoError",
]
