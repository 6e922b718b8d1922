"""Agent runtime, reference behaviours and the in-process swarm."""
from .reference import (
    ArchetypeKind,
    PlayerArchetype,
    ReferencePlayer,
    ReferenceSupporter,
    default_archetype,
    reference_player,
    reference_supporter,
)
from .sdk import AgentBehavior, AgentSummary, EchoBehavior, Identity, run_agent_loop
from .swarm import InProcessSwarm, SwarmError, in_process_swarm

__all__ = [
    "AgentBehavior",
    "AgentSummary",
    "ArchetypeKind",
    "EchoBehavior",
    "Identity",
    "InProcessSwarm",
    "PlayerArchetype",
    "ReferencePlayer",
    "ReferenceSupporter",
    "SwarmError",
    "default_archetype",
    "in_process_swarm",
    "reference_player",
    "reference_supporter",
    "run_agent_loop",
]
