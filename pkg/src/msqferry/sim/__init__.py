"""Discrete-event delivery simulation in two modes: abstract M/M/1 servers or explicit ferries."""
from __future__ import annotations

from ..cycles import CyclePlan
from ..geometry import Network
from .config import EVENT_TYPES, Mode, ScriptEvent, SimConfig
from .ferry_mode import FerrySimulation, run_ferry
from .metrics import EventLog, MessageRecord, Metrics
from .queue_mode import run_queue

__all__ = ["EVENT_TYPES", "EventLog", "FerrySimulation", "MessageRecord", "Metrics", "Mode",
           "ScriptEvent", "SimConfig", "run"]


def run(network: Network, plan: CyclePlan, config: SimConfig) -> Metrics:
    if config.mode is Mode.QUEUE_ABSTRACTION:
        return run_queue(network, plan, config)
    return run_ferry(network, plan, config)
