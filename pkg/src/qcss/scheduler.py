"""The authoritative tick scheduler.

Each tick the scheduler broadcasts one reality, collects complete-world
proposals until the deadline, scores the previous tick's proposals against
the current reality and samples the next reality from the resulting
distribution. It never simulates anything itself.
"""
from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .consciousness import (
    REPEAT_REALITY,
    ScoredProposal,
    SelectionDistribution,
    Winner,
    distribution_from_arrays,
    make_rng,
    sample,
    score_kernel,
    update_will_arrays,
)
from .model import (
    N_SHIRTS,
    AgentId,
    InvalidReason,
    MatchConfig,
    PlayerEntry,
    Role,
    Roster,
    RosterError,
    StateVector,
    Team,
    WillTable,
    distances_to,
    invalid_rows,
    make_kickoff_lineup,
    validate_state_vector,
    MAX_PLAYERS,
)

log = logging.getLogger(__name__)


class Phase(enum.Enum):
    LOBBY = "lobby"
    BROADCASTING = "broadcasting"
    COLLECTING = "collecting"
    SELECTING = "selecting"
    FINISHED = "finished"


class SchedulerError(RuntimeError):
    pass


@dataclass(frozen=True)
class Proposal:
    """One received proposal; ``arrival_us`` is measured from the tick start."""

    agent: AgentId
    state: StateVector
    arrival_us: int = 0


@dataclass(frozen=True, eq=False)
class TickRecord:
    tick: int
    reality: StateVector
    proposals_received: tuple[tuple[AgentId, int], ...]
    eligible: frozenset[AgentId]
    distribution: SelectionDistribution
    winner: Winner
    will_snapshot: WillTable
    scored: tuple[ScoredProposal, ...] = ()
    proposals: Mapping[AgentId, StateVector] = field(default_factory=dict)
    duplicates: tuple[tuple[AgentId, int], ...] = ()
    invalid: tuple[tuple[AgentId, str], ...] = ()

    @property
    def stalled(self) -> bool:
        return self.winner is REPEAT_REALITY

    @property
    def next_reality(self) -> StateVector:
        if self.winner is REPEAT_REALITY:
            return self.reality
        return self.proposals[self.winner]


class Scheduler:
    """Mutable scheduler state owned by a single thread.

    Agents are registered in the lobby, ``start`` seeds the generator and
    publishes the starting lineup, and ``run_tick`` consumes one tick's
    timestamped proposals.
    """

    def __init__(self, config: MatchConfig):
        self.config = config
        self.phase = Phase.LOBBY
        self.current_tick = 0
        self.current_reality: Optional[StateVector] = None
        self.prev_proposals: dict[AgentId, StateVector] = {}
        self.on_time_prev: frozenset[AgentId] = frozenset()
        self.rng: Optional[np.random.Generator] = None
        self.last_selection_seconds = 0.0
        # previous tick's valid proposals as arrays: sorted ids, row into coords
        self._prev_ids = np.empty(0, dtype=np.int64)
        self._prev_rows = np.empty(0, dtype=np.int64)
        self._prev_coords = np.empty((0, 46))
        # lobby registrations accumulate in plain dicts; the immutable roster
        # and will table are rebuilt only when someone looks at them
        roster = config.roster
        will = config.initial_will if config.initial_will is not None else self._default_will(roster)
        self._players = dict(roster.players)
        self._supporters = dict(roster.supporters)
        self._will_values = dict(will)
        self._supporter_counts = {t: sum(1 for f in self._supporters.values() if f == t) for t in Team}
        self._roster: Optional[Roster] = roster
        self._will: Optional[WillTable] = will
        self._next_id = max(roster.agent_ids(), default=0) + 1

    @property
    def roster(self) -> Roster:
        if self._roster is None:
            self._roster = Roster(dict(self._players), dict(self._supporters))
        return self._roster

    @property
    def will(self) -> WillTable:
        if self._will is None:
            self._will = WillTable(self._will_values, self._players)
        return self._will

    # -- lobby --------------------------------------------------------------

    def _supporter_share(self, team: Team) -> float:
        budget = float(self.config.supporter_budget.get(team, 0.0))
        expected = int(self.config.expected_supporters.get(team, 0))
        return budget / expected if expected else 0.0

    def _default_will(self, roster: Roster) -> WillTable:
        will = {a: 1.0 for a in roster.players}
        for agent, team in roster.supporters.items():
            will[agent] = self._supporter_share(team)
        return WillTable(will, roster.players)

    def register_agent(self, role: Role, team: Team | str, shirt: Optional[int] = None) -> AgentId:
        if self.phase is not Phase.LOBBY:
            raise RosterError("MatchAlreadyStarted")
        role = Role(role)
        team = Team.parse(team)
        agent = self._next_id
        if role is Role.PLAYER:
            if len(self._players) >= MAX_PLAYERS:
                raise RosterError("RosterFull", f"{MAX_PLAYERS} players already registered")
            taken = {e.shirt for e in self._players.values() if e.team == team}
            free = [n for n in range(1, N_SHIRTS + 1) if n not in taken]
            if shirt is None:
                if not free:
                    raise RosterError("RosterFull", f"no free shirt for {team.name}")
                shirt = free[0]
            elif not 1 <= shirt <= N_SHIRTS:
                raise RosterError("BadShirt", f"shirt {shirt} outside 1..{N_SHIRTS}")
            elif shirt not in free:
                raise RosterError("DuplicateShirt", f"{team.name} #{shirt} taken")
            self._players[agent] = PlayerEntry(team, int(shirt))
            self._will_values[agent] = 1.0
        else:
            if self._supporter_counts[team] >= int(self.config.expected_supporters.get(team, 0)):
                raise RosterError("RosterFull", f"supporter slots for {team.name} exhausted")
            self._supporters[agent] = team
            self._supporter_counts[team] += 1
            self._will_values[agent] = self._supporter_share(team)
        self._roster = self._will = None
        self._next_id += 1
        return agent

    def registration(self, agent: AgentId) -> tuple[Optional[int], float]:
        """Shirt (None for supporters) and current will of a registered agent."""
        entry = self._players.get(agent)
        if self._will is not None:
            return (entry.shirt if entry else None), self._will[agent]
        return (entry.shirt if entry else None), self._will_values[agent]

    def start(self) -> "Scheduler":
        if self.phase is not Phase.LOBBY:
            raise RosterError("MatchAlreadyStarted")
        if not len(self.roster):
            raise SchedulerError("cannot start a match without agents")
        if set(self.will) != set(self.roster.agent_ids()):
            raise SchedulerError("initial will does not cover exactly the roster")
        lineup = self.config.starting_lineup or make_kickoff_lineup(self.config.pitch)
        reason = validate_state_vector(lineup, self.config)
        if reason is not None:
            raise SchedulerError(f"invalid starting lineup: {reason.value}")
        self.current_reality = lineup
        self.rng = make_rng(self.config.rng_seed)
        self.phase = Phase.BROADCASTING
        return self

    # -- ticks --------------------------------------------------------------

    @property
    def finished(self) -> bool:
        return self.phase is Phase.FINISHED

    def begin_tick(self) -> tuple[int, StateVector]:
        """Broadcasting -> Collecting; returns what should be sent to agents."""
        if self.phase is not Phase.BROADCASTING:
            raise SchedulerError(f"cannot broadcast in phase {self.phase.value}")
        self.phase = Phase.COLLECTING
        return self.current_tick, self.current_reality

    def run_tick(self, proposals: Iterable[Proposal]) -> TickRecord:
        """Close collection for the current tick and select the next reality."""
        if self.phase is Phase.BROADCASTING:
            self.begin_tick()
        if self.phase is not Phase.COLLECTING:
            raise SchedulerError(f"cannot select in phase {self.phase.value}")
        self.phase = Phase.SELECTING
        cfg = self.config
        reality = self.current_reality
        deadline_us = cfg.proposal_deadline_ms * 1000

        # earliest copy per agent wins; sort is stable so ties keep input order
        kept: dict[AgentId, Proposal] = {}
        duplicates: list[tuple[AgentId, int]] = []
        invalid: list[tuple[AgentId, str]] = []
        for p in sorted(proposals, key=lambda p: p.arrival_us):
            if p.agent in kept:
                duplicates.append((p.agent, p.arrival_us))
            elif p.agent not in self.roster:
                invalid.append((p.agent, "UnknownAgent"))
            else:
                kept[p.agent] = p

        on_time = [p for p in kept.values() if p.arrival_us < deadline_us]
        ids, rows, coords, states = self._screen(on_time, invalid)
        on_time_now = frozenset(states)

        t0 = time.perf_counter()
        bootstrap = self.current_tick == 0
        if bootstrap:
            eligible_mask = np.ones(len(ids), dtype=bool)
        else:
            eligible_mask = _sorted_member(ids, self._prev_ids)
        sc = self._score(ids, eligible_mask, reality, bootstrap)
        dist = distribution_from_arrays(ids, sc, eligible_mask)
        winner = sample(dist, self.rng)
        self.last_selection_seconds = time.perf_counter() - t0

        eligible = frozenset(ids[eligible_mask].tolist())
        scored = tuple(
            ScoredProposal(a, v, e) for a, v, e in zip(ids.tolist(), sc.tolist(), eligible_mask.tolist())
        )
        record = TickRecord(
            tick=self.current_tick,
            reality=reality,
            proposals_received=tuple((p.agent, p.arrival_us) for p in kept.values()),
            eligible=eligible,
            distribution=dist,
            winner=winner,
            will_snapshot=self.will,
            scored=scored,
            proposals={a: p.state for a, p in kept.items()},
            duplicates=tuple(duplicates),
            invalid=tuple(invalid),
        )

        if winner is not REPEAT_REALITY:
            self.current_reality = states[winner]
        full_sc = np.zeros(len(self.will))
        if len(ids):
            full_sc[self.will.index_of(ids)] = sc
        self._will = update_will_arrays(self.will, full_sc, cfg.will_update_rate)
        self.prev_proposals = states
        self.on_time_prev = on_time_now
        self._prev_ids, self._prev_rows, self._prev_coords = ids, rows, coords
        self.current_tick += 1
        self.phase = Phase.FINISHED if self.current_tick >= cfg.match_ticks else Phase.BROADCASTING
        if winner is REPEAT_REALITY:
            log.debug("tick %d stalled (%d on time)", record.tick, len(on_time_now))
        return record

    def _screen(self, on_time: Sequence[Proposal], invalid: list[tuple[AgentId, str]]):
        """Drop invalid proposals (they count as late) and note why.

        Returns the surviving agents as a sorted id array, each one's row in a
        coordinate matrix of distinct state objects, that matrix, and the
        agent -> state mapping.
        """
        if not on_time:
            return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), np.empty((0, 46)), {}
        cfg = self.config
        # swarms often hand the same state object to many agents
        slot: dict[int, int] = {}
        uniq: list[np.ndarray] = []
        rows = np.empty(len(on_time), dtype=np.int64)
        for i, p in enumerate(on_time):
            k = id(p.state)
            if k not in slot:
                slot[k] = len(uniq)
                uniq.append(p.state.coords)
            rows[i] = slot[k]
        coords = np.stack(uniq)
        bad_coords = invalid_rows(coords, cfg.pitch, cfg.bounds_check)
        keep = np.ones(len(on_time), dtype=bool)
        for i in np.flatnonzero(bad_coords[rows]).tolist():
            keep[i] = False
        for i, p in enumerate(on_time):
            s = p.state
            if keep[i] and not (isinstance(s.possessing_team, Team) and 1 <= s.possessing_player <= N_SHIRTS):
                keep[i] = False
        for i in np.flatnonzero(~keep).tolist():
            p = on_time[i]
            reason = validate_state_vector(p.state, cfg)
            invalid.append((p.agent, reason.value if reason else InvalidReason.NON_FINITE.value))
        agents = np.fromiter((p.agent for p in on_time), dtype=np.int64, count=len(on_time))[keep]
        rows = rows[keep]
        order = np.argsort(agents, kind="stable")
        agents, rows = agents[order], rows[order]
        states = {p.agent: p.state for p, k in zip(on_time, keep.tolist()) if k}
        return agents, rows, coords, states

    def _score(self, ids: np.ndarray, eligible: np.ndarray, reality: StateVector, bootstrap: bool) -> np.ndarray:
        sc = np.zeros(len(ids))
        if not eligible.any():
            return sc
        live = ids[eligible]
        pos = self.will.index_of(live)
        will = self.will.values[pos]
        if bootstrap:
            sc[eligible] = will
            return sc
        is_player = self.will.is_player[pos]
        rows = self._prev_rows[np.searchsorted(self._prev_ids, live)]
        dist = distances_to(self._prev_coords, reality)[rows]
        sc[eligible] = score_kernel(is_player, will, dist)
        return sc


def _sorted_member(values: np.ndarray, sorted_ref: np.ndarray) -> np.ndarray:
    """``values[i] in sorted_ref`` for each i; ``sorted_ref`` ascending."""
    if not len(sorted_ref):
        return np.zeros(len(values), dtype=bool)
    pos = np.minimum(np.searchsorted(sorted_ref, values), len(sorted_ref) - 1)
    return sorted_ref[pos] == values


def start_match(cfg: MatchConfig) -> Scheduler:
    """Scheduler for a config whose roster is already complete, started at tick 0."""
    return Scheduler(cfg).start()


def run_tick(state: Scheduler, proposals: Iterable[Proposal]) -> tuple[Scheduler, TickRecord]:
    record = state.run_tick(proposals)
    return state, record
