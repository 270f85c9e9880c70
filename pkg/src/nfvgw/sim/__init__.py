from .config import AppConfig, DeviceData, ScenarioConfig, load_scenario, parse_scenario
from .engine import EventLog, LogLine, Simulator
from .harness import (
    Domain,
    MetricsReport,
    compare_chain_orders,
    emit_report,
    gen_scale_topology,
    run_scenario,
    run_upgrade_scenario,
)

__all__ = [
    "AppConfig",
    "DeviceData",
    "Domain",
    "EventLog",
    "LogLine",
    "MetricsReport",
    "ScenarioConfig",
    "Simulator",
    "compare_chain_orders",
    "emit_report",
    "gen_scale_topology",
    "load_scenario",
    "parse_scenario",
    "run_scenario",
    "run_upgrade_scenario",
]
