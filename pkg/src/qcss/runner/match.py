"""Running, recording and replaying whole matches."""
from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

from ..agents.reference import default_archetype, reference_player, reference_supporter
from ..agents.sdk import AgentBehavior, AgentSummary, EchoBehavior, Identity, run_agent_loop
from ..agents.swarm import InProcessSwarm
from ..consciousness import REPEAT_REALITY
from ..model import Pitch, Role, Team
from ..scheduler import Proposal, Scheduler, TickRecord
from ..wire.transport import StadiumServer, UdpConnection
from .config import AgentGroup, RunConfig
from .stats import MatchStats, compute_stats
from .trace import TraceFile, TraceWriter, make_header

log = logging.getLogger(__name__)


class MatchError(RuntimeError):
    pass


def behavior_factory(group: AgentGroup, pitch: Pitch) -> Callable[[Identity], AgentBehavior]:
    if group.behavior == "reference-player":
        return lambda me: reference_player(default_archetype(me.team, me.shirt, pitch, group.max_speed), me, pitch)
    if group.behavior == "reference-supporter":
        return lambda me: reference_supporter(me.team, group.bias, pitch)
    return lambda me: EchoBehavior()


@dataclass
class MatchResult:
    records: list[TickRecord]
    stats: MatchStats
    header: dict
    trace_path: Optional[Path] = None
    agent_summaries: list[AgentSummary] = field(default_factory=list)
    selection_seconds: list[float] = field(default_factory=list)

    @property
    def trace(self) -> TraceFile:
        return TraceFile(self.header, self.records)


def run_match(
    cfg: RunConfig,
    trace_path: Optional[str | Path] = None,
    *,
    virtual_clock: bool = False,
    keep_records: bool = True,
    bind: tuple[str, int] = ("127.0.0.1", 0),
) -> MatchResult:
    """Play ``cfg.match.match_ticks`` ticks and optionally write a trace.

    In virtual-clock mode every agent runs in process and arrival stamps are
    the configured per-group latencies, so a given config always produces
    the same trace. Otherwise the scheduler listens on ``bind`` and agent
    groups marked ``external`` are awaited there instead of being spawned.
    """
    if virtual_clock or cfg.transport == "inprocess":
        if any(g.transport == "external" for g in cfg.agents):
            raise MatchError("external agents cannot take part in a virtual-clock match")
        return _run_virtual(cfg, trace_path, keep_records)
    return _run_udp(cfg, trace_path, keep_records, bind)


def _header(cfg: RunConfig, sched: Scheduler, mode: str) -> dict:
    return make_header(sched.config, sched.roster, sched.will, sched.current_reality, {"mode": mode})


def _make_swarm(cfg: RunConfig, sched: Scheduler, groups) -> InProcessSwarm:
    swarm = InProcessSwarm()
    for g in groups:
        swarm.add(sched, g.count, behavior_factory(g, cfg.match.pitch), g.role, g.team,
                  arrival_us=int(round(g.latency_ms * 1000)))
    return swarm


def _scheduler_for(cfg: RunConfig) -> Scheduler:
    match = replace(cfg.match, expected_supporters=cfg.expected_supporters())
    return Scheduler(match)


def _run_virtual(cfg: RunConfig, trace_path, keep_records: bool) -> MatchResult:
    sched = _scheduler_for(cfg)
    swarm = _make_swarm(cfg, sched, cfg.agents)
    sched.start()
    header = _header(cfg, sched, "virtual")
    writer = TraceWriter(trace_path, header) if trace_path else None
    records: list[TickRecord] = []
    timings: list[float] = []
    try:
        while not sched.finished:
            tick, reality = sched.begin_tick()
            rec = sched.run_tick(swarm.proposals(tick, reality, sched.will))
            timings.append(sched.last_selection_seconds)
            if writer:
                writer.write(rec)
            records.append(rec)
    finally:
        if writer:
            writer.close()
    stats = compute_stats(records, sched.roster, cfg.match.pitch.length)
    return MatchResult(records if keep_records else [], stats, header,
                       Path(trace_path) if trace_path else None, [], timings)


def _run_udp(cfg: RunConfig, trace_path, keep_records: bool, bind: tuple[str, int]) -> MatchResult:
    sched = _scheduler_for(cfg)
    match = sched.config
    summaries: list[AgentSummary] = []
    threads: list[threading.Thread] = []
    swarm = InProcessSwarm()
    with StadiumServer(sched, *bind) as server:
        host, port = server.address
        if host in ("0.0.0.0", ""):
            host = "127.0.0.1"
        external = 0
        for g in cfg.agents:
            if g.transport == "external":
                external += g.count
                continue
            if (g.transport or cfg.transport) == "inprocess":
                swarm.add(sched, g.count, behavior_factory(g, match.pitch), g.role, g.team,
                          arrival_us=int(round(g.latency_ms * 1000)))
                continue
            factory = behavior_factory(g, match.pitch)
            for _ in range(g.count):
                threads.append(_spawn_socket_agent(server, sched, g, factory, host, port, cfg, summaries))
        if external:
            log.info("waiting for %d external agents on %s:%d", external, *server.address)
            server.serve_lobby(len(server.peers) + external, cfg.join_timeout_s)
        sched.start()
        header = _header(cfg, sched, "udp")
        writer = TraceWriter(trace_path, header) if trace_path else None
        records: list[TickRecord] = []
        timings: list[float] = []
        period_ns = match.tick_period_ms * 1_000_000
        deadline_off_ns = match.proposal_deadline_ms * 1_000_000
        try:
            next_start = time.monotonic_ns()
            while not sched.finished:
                now = time.monotonic_ns()
                if now < next_start:
                    time.sleep((next_start - now) / 1e9)
                t0 = time.monotonic_ns()
                tick, reality = sched.begin_tick()
                server.broadcast(tick, reality)
                local = swarm.proposals(tick, reality, sched.will) if len(swarm) else []
                received = server.collect(tick, t0, t0 + deadline_off_ns)
                rec = sched.run_tick(received + local)
                timings.append(sched.last_selection_seconds)
                if writer:
                    writer.write(rec)
                records.append(rec)
                next_start = t0 + period_ns
        finally:
            if writer:
                writer.close()
            server.end_match(sched.current_tick)
            for t in threads:
                t.join(timeout=5.0)
    stats = compute_stats(records, sched.roster, match.pitch.length)
    return MatchResult(records if keep_records else [], stats, header,
                       Path(trace_path) if trace_path else None, summaries, timings)


def _spawn_socket_agent(server, sched, group, factory, host, port, cfg: RunConfig, summaries) -> threading.Thread:
    """Start one agent thread and wait until its join is acknowledged, so ids follow config order."""
    joined = threading.Event()
    failure: list[BaseException] = []

    def body() -> None:
        conn = UdpConnection(host, port)
        try:
            ack = conn.join(group.role, group.team, timeout=cfg.join_timeout_s)
            shirt_no, _ = sched.registration(ack.agent_id)
            me = Identity(ack.agent_id, group.role, group.team, shirt_no, ack.initial_w)
            behavior = factory(me)
            joined.set()
            summaries.append(run_agent_loop(behavior, conn, ack, me, cfg.deadline_margin_ms))
        except BaseException as exc:  # reported to the spawning thread
            failure.append(exc)
            joined.set()
        finally:
            conn.close()

    t = threading.Thread(target=body, name=f"qcss-agent-{group.behavior}", daemon=True)
    t.start()
    before = len(server.peers)
    server.serve_lobby(before + 1, cfg.join_timeout_s)
    if not joined.wait(cfg.join_timeout_s) or failure:
        raise MatchError(f"agent spawn failed: {failure[0] if failure else 'no acknowledgement'}")
    return t


# -- replay --------------------------------------------------------------------

@dataclass
class ReplayReport:
    ticks: int
    mismatches: list[str]

    @property
    def identical(self) -> bool:
        return not self.mismatches


def replay(trace: TraceFile) -> ReplayReport:
    """Re-run the recorded transcript through a fresh scheduler and compare every tick."""
    sched = Scheduler(trace.config).start()
    mismatches = []
    for rec in trace.records:
        if sched.finished:
            mismatches.append(f"tick {rec.tick}: trace runs past match_ticks")
            break
        props = [Proposal(a, rec.proposals[a], arrival) for a, arrival in rec.proposals_received]
        got = sched.run_tick(props)
        for name, same in (
            ("reality", got.reality == rec.reality),
            ("eligible", got.eligible == rec.eligible),
            ("distribution", got.distribution == rec.distribution),
            ("winner", got.winner == rec.winner),
            ("will", got.will_snapshot == rec.will_snapshot),
        ):
            if not same:
                mismatches.append(f"tick {rec.tick}: {name} differs")
    return ReplayReport(len(trace.records), mismatches)


def winner_sequence(records) -> list:
    return [None if r.winner is REPEAT_REALITY else r.winner for r in records]
