"""Predictive network management on an optimistic (Time Warp) simulation kernel."""

from .harness import ExperimentConfig, RunReport, emit_plots, load_config, run, suite
from .network import Topology, TwinConfig, build_network
from .polling import (
    InfeasiblePlan,
    NoInformation,
    PollingParams,
    PredictionTriple,
    fuse,
    max_devices,
    min_period,
    overhead_bandwidth_pct,
    recommend_interval,
)
from .sync import Coordinator, compute_gvt, t_ahead, within_window
from .timebase import TICKS_PER_UNIT, Message, ticks, units
from .verification import ErrorModel, ac_n, ac_t, calibrate, t_vfail

__all__ = [
    "TICKS_PER_UNIT", "Coordinator", "ErrorModel", "ExperimentConfig", "InfeasiblePlan",
    "Message", "NoInformation", "PollingParams", "PredictionTriple", "RunReport", "Topology",
    "TwinConfig", "ac_n", "ac_t", "build_network", "calibrate", "compute_gvt", "emit_plots",
    "fuse", "load_config", "max_devices", "min_period", "overhead_bandwidth_pct",
    "recommend_interval", "run", "suite", "t_ahead", "t_vfail", "ticks", "units",
    "within_window",
]
