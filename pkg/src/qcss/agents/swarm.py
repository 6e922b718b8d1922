"""In-process agents that feed the scheduler without touching the network."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from ..model import Role, StateVector, Team
from ..scheduler import Proposal, Scheduler
from .sdk import AgentBehavior, Identity

BehaviorFactory = Callable[[Identity], AgentBehavior]


class SwarmError(RuntimeError):
    pass


@dataclass
class _Member:
    identity: Identity
    behavior: AgentBehavior
    arrival_us: int


class InProcessSwarm:
    """Agents living inside the scheduler process.

    Proposals carry synthetic arrival stamps and go through the same
    ``Scheduler.run_tick`` path as datagram traffic.
    """

    def __init__(self) -> None:
        self.members: list[_Member] = []

    def __len__(self) -> int:
        return len(self.members)

    def add(
        self,
        scheduler: Scheduler,
        count: int,
        factory: BehaviorFactory,
        role: Role = Role.SUPPORTER,
        team: Team = Team.HOME,
        shirt: Optional[int] = None,
        arrival_us: int = 0,
    ) -> list[int]:
        if count < 1:
            raise ValueError("count must be >= 1")
        ids = []
        for _ in range(count):
            agent = scheduler.register_agent(role, team, shirt)
            shirt_no, w = scheduler.registration(agent)
            me = Identity(agent, Role(role), Team(team), shirt_no, w)
            try:
                behavior = factory(me)
            except MemoryError as exc:
                raise SwarmError(f"out of memory after {len(self.members)} swarm agents") from exc
            self.members.append(_Member(me, behavior, int(arrival_us)))
            ids.append(agent)
        return ids

    def proposals(self, tick: int, reality: StateVector, will=None) -> list[Proposal]:
        """Run every member's observe/step/propose cycle against ``reality``."""
        out = []
        try:
            for m in self.members:
                me = m.identity if will is None else Identity(
                    m.identity.agent_id, m.identity.role, m.identity.team, m.identity.shirt, will[m.identity.agent_id]
                )
                b = m.behavior
                state = b.observe(reality, me)
                while not b.done(state):
                    state = b.step(state)
                out.append(Proposal(me.agent_id, b.propose(state), m.arrival_us))
        except MemoryError as exc:
            raise SwarmError(f"out of memory at tick {tick} with {len(out)}/{len(self.members)} proposals") from exc
        return out


def in_process_swarm(scheduler: Scheduler, count: int, behavior_factory: BehaviorFactory, team: Team = Team.HOME) -> InProcessSwarm:
    swarm = InProcessSwarm()
    swarm.add(scheduler, count, behavior_factory, Role.SUPPORTER, team)
    return swarm
