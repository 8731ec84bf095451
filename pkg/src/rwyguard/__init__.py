"""Runway overrun prediction and advisory toolkit."""

__version__ = "0.1.0"

from .forces import AircraftParams, AtmosphereParams, RunwayParams
from .statics import (DistanceBreakdown, IntegratorConfig, LandingConfig,
                      NonConvergence, TakeoffConfig, compute_asdr, compute_bdr,
                      compute_ldr)
from .dynamics import (Confidence, LandingSession, PredictionSnapshot, Stage,
                       TakeoffSession)
from .fsm import (LandingMachine, LandingState, Severity, StatusColor,
                  TakeoffMachine, TakeoffState, color_of)
from .telemetry import ChannelMapping, TelemetryFrame
from .simulator import Scenario, run_scenario

__all__ = [
    "AircraftParams", "AtmosphereParams", "RunwayParams",
    "DistanceBreakdown", "IntegratorConfig", "LandingConfig", "NonConvergence",
    "TakeoffConfig", "compute_asdr", "compute_bdr", "compute_ldr",
    "Confidence", "LandingSession", "PredictionSnapshot", "Stage",
    "TakeoffSession",
    "LandingMachine", "LandingState", "Severity", "StatusColor",
    "TakeoffMachine", "TakeoffState", "color_of",
    "ChannelMapping", "TelemetryFrame",
    "Scenario", "run_scenario",
    "__version__",
]
