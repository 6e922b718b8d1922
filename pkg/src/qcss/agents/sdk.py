"""Agent runtime: observe the broadcast reality, iterate privately, propose in time."""
from __future__ import annotations

import abc
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Protocol

from ..model import AgentId, Role, StateVector, Team
from ..wire.codec import Error, JoinAck, MatchEnd, Message, ProposalMsg, Reality

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Identity:
    agent_id: AgentId
    role: Role
    team: Team
    shirt: Optional[int] = None
    will: float = 0.0


class AgentBehavior(abc.ABC):
    """Decision interface of one agent.

    ``observe`` turns the broadcast reality into private state, ``step`` is
    one inner iteration on that state and ``propose`` extracts the complete
    world the agent wants to become reality.
    """

    @abc.abstractmethod
    def observe(self, reality: StateVector, me: Identity) -> Any: ...

    def step(self, state: Any) -> Any:
        return state

    @abc.abstractmethod
    def propose(self, state: Any) -> StateVector: ...

    def done(self, state: Any) -> bool:
        """True once further ``step`` calls would not improve the proposal."""
        return True


class EchoBehavior(AgentBehavior):
    """Proposes exactly the reality it was shown."""

    def observe(self, reality: StateVector, me: Identity) -> StateVector:
        return reality

    def propose(self, state: StateVector) -> StateVector:
        return state


class Connection(Protocol):
    def send(self, m: Message) -> None: ...

    def recv(self, timeout: Optional[float]) -> Optional[Message]: ...


@dataclass
class AgentSummary:
    agent_id: AgentId
    proposals_sent: int = 0
    ticks: list[int] = field(default_factory=list)
    stale_ignored: int = 0
    steps: int = 0
    final_tick: Optional[int] = None
    lost: bool = False
    error: Optional[str] = None


def run_agent_loop(
    behavior: AgentBehavior,
    connection: Connection,
    ack: JoinAck,
    identity: Identity,
    deadline_margin_ms: float = 10.0,
    loss_timeout: float = 5.0,
    clock: Callable[[], float] = time.monotonic,
    max_steps: int = 10_000,
) -> AgentSummary:
    """Serve one joined agent until MatchEnd or until the scheduler goes quiet.

    The step budget for a tick ends ``deadline_margin_ms`` before the
    proposal deadline, measured from when the reality arrived.
    """
    summary = AgentSummary(identity.agent_id)
    budget_s = (ack.proposal_deadline_ms - deadline_margin_ms) / 1000.0
    last_tick = -1
    silent_since = clock()
    while True:
        msg = connection.recv(timeout=0.25)
        if msg is None:
            if clock() - silent_since >= loss_timeout:
                summary.lost = True
                log.warning("agent %d: no traffic for %.1fs, giving up", identity.agent_id, loss_timeout)
                return summary
            continue
        silent_since = clock()
        if isinstance(msg, MatchEnd):
            summary.final_tick = msg.final_tick
            return summary
        if isinstance(msg, Error):
            summary.error = msg.code.name
            return summary
        if not isinstance(msg, Reality):
            continue
        if msg.tick <= last_tick:
            summary.stale_ignored += 1
            continue
        last_tick = msg.tick
        received = clock()
        me = Identity(identity.agent_id, identity.role, identity.team, identity.shirt, msg.will_of_recipient)
        state = behavior.observe(msg.state, me)
        steps = 0
        while steps < max_steps and clock() - received < budget_s and not behavior.done(state):
            state = behavior.step(state)
            steps += 1
        summary.steps += steps
        connection.send(ProposalMsg(msg.tick, identity.agent_id, behavior.propose(state)))
        summary.proposals_sent += 1
        summary.ticks.append(msg.tick)
