"""Discrete-event simulation of output-queued cell switches."""

from .engine import (
    LOST,
    CellRecord,
    Trace,
    calibrate_monitor_overhead,
    monitor_ctd,
    reverse_route,
    routes_from_config,
    run_signaling_exchange,
    simulate,
)
from .kernel import BACKEND
from .model import (
    InvalidSpecError,
    MonitorModel,
    NetworkModel,
    Route,
    SwitchModel,
    TrafficSpec,
)

__all__ = [
    "BACKEND",
    "LOST",
    "CellRecord",
    "InvalidSpecError",
    "MonitorModel",
    "NetworkModel",
    "Route",
    "SwitchModel",
    "Trace",
    "TrafficSpec",
    "calibrate_monitor_overhead",
    "monitor_ctd",
    "reverse_route",
    "routes_from_config",
    "run_signaling_exchange",
    "simulate",
]
