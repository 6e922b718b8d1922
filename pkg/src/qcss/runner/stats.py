"""Match statistics computed purely from tick records.

Definitions, with T the number of records:

* ``selection_counts[a]``: ticks whose winner is agent ``a``;
  ``selection_share[a] = selection_counts[a] / T``.
* ``stall_count``: ticks that repeated the reality; shares plus
  ``stall_count / T`` sum to one.
* ``role_sc``: mean, min and max of the consciousness value over all
  eligible scored entries of each role.
* ``ball_mean``: mean ball position over the broadcast realities.
* ``half_occupancy``: fraction of realities with the ball strictly inside
  the home half (x < length/2) or the away half (x > length/2), the latter
  being the half the home side attacks.
* ``late_counts[a]``: ticks in which agent ``a`` had no valid on-time
  proposal (absent, late or invalid).
* ``team_supporter_share``: summed selection share of each team's supporters.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..consciousness import REPEAT_REALITY
from ..model import MatchConfig, Role, Roster, Team
from ..scheduler import TickRecord
from .trace import TraceFile, read_trace


@dataclass
class MatchStats:
    ticks: int
    selection_counts: dict[int, int] = field(default_factory=dict)
    selection_share: dict[int, float] = field(default_factory=dict)
    stall_count: int = 0
    stall_share: float = 0.0
    role_sc: dict[str, dict[str, float]] = field(default_factory=dict)
    ball_mean: tuple[float, float] = (math.nan, math.nan)
    half_occupancy: dict[str, float] = field(default_factory=dict)
    late_counts: dict[int, int] = field(default_factory=dict)
    team_supporter_share: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ball_mean"] = list(self.ball_mean)
        return d


def compute_stats(records: Sequence[TickRecord], roster: Roster, pitch_length: float) -> MatchStats:
    T = len(records)
    agents = roster.agent_ids()
    counts = {a: 0 for a in agents}
    late = {a: 0 for a in agents}
    sc_by_role: dict[Role, list[float]] = {Role.PLAYER: [], Role.SUPPORTER: []}
    stalls = 0
    xs = np.empty(T)
    ys = np.empty(T)
    for i, rec in enumerate(records):
        if rec.winner is REPEAT_REALITY:
            stalls += 1
        else:
            counts[rec.winner] = counts.get(rec.winner, 0) + 1
        on_time = {s.agent for s in rec.scored}
        for a in agents:
            if a not in on_time:
                late[a] += 1
        for s in rec.scored:
            if s.eligible and s.agent in roster:
                sc_by_role[roster.role_of(s.agent)].append(s.sc_value)
        xs[i], ys[i] = rec.reality.coords[0], rec.reality.coords[1]

    share = {a: (n / T if T else 0.0) for a, n in counts.items()}
    role_sc = {}
    for role, vals in sc_by_role.items():
        if vals:
            role_sc[role.name.lower()] = {
                "n": len(vals), "mean": math.fsum(vals) / len(vals), "min": min(vals), "max": max(vals),
            }
        else:
            role_sc[role.name.lower()] = {"n": 0, "mean": math.nan, "min": math.nan, "max": math.nan}
    half = pitch_length / 2.0
    team_share = {
        t.name.lower(): math.fsum(share[a] for a, ft in roster.supporters.items() if ft is t) for t in Team
    }
    return MatchStats(
        ticks=T,
        selection_counts=counts,
        selection_share=share,
        stall_count=stalls,
        stall_share=stalls / T if T else 0.0,
        role_sc=role_sc,
        ball_mean=(float(xs.mean()), float(ys.mean())) if T else (math.nan, math.nan),
        half_occupancy={
            "home_half": float((xs < half).mean()) if T else math.nan,
            "away_half": float((xs > half).mean()) if T else math.nan,
        },
        late_counts=late,
        team_supporter_share=team_share,
    )


def stats_for_trace(trace: TraceFile) -> MatchStats:
    cfg: MatchConfig = trace.config
    return compute_stats(trace.records, cfg.roster, cfg.pitch.length)


def stats(trace_path: str | Path) -> MatchStats:
    return stats_for_trace(read_trace(trace_path))
