"""Distributed football simulation where agents propose whole-world states
and a scheduler samples the next reality by prediction accuracy."""
from .consciousness import (
    REPEAT_REALITY,
    SelectionDistribution,
    late_filtered_distribution,
    sample,
    soccer_consciousness,
    update_will,
)
from .model import MatchConfig, Pitch, Role, Roster, StateVector, Team, WillTable, distance, validate_state_vector
from .scheduler import Proposal, Scheduler, TickRecord, run_tick, start_match

__version__ = "0.1.0"

__all__ = [
    "MatchConfig",
    "Pitch",
    "Proposal",
    "REPEAT_REALITY",
    "Role",
    "Roster",
    "Scheduler",
    "SelectionDistribution",
    "StateVector",
    "Team",
    "TickRecord",
    "WillTable",
    "distance",
    "late_filtered_distribution",
    "run_tick",
    "sample",
    "soccer_consciousness",
    "start_match",
    "update_will",
    "validate_state_vector",
]
