"""Home-advantage experiment: supporter configurations compared over seeded matches."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Optional, Sequence

import numpy as np

from ..consciousness import REPEAT_REALITY
from ..model import Role, Team
from .config import AgentGroup, RunConfig
from .match import run_match


@dataclass(frozen=True)
class SupporterSetup:
    label: str
    home_count: int
    guest_count: int
    home_budget: float
    guest_budget: float
    bias: float = 1.0


HOME_ONLY = SupporterSetup("home-only", 10, 0, 1.0, 0.0)
SYMMETRIC = SupporterSetup("symmetric", 5, 5, 0.5, 0.5)
NO_SUPPORTERS = SupporterSetup("none", 0, 0, 0.0, 0.0)


def config_for(base: RunConfig, setup: SupporterSetup) -> RunConfig:
    """``base`` with its supporter groups replaced by ``setup``; players are kept."""
    groups = [g for g in base.agents if g.role is Role.PLAYER]
    for team, count in ((Team.HOME, setup.home_count), (Team.GUEST, setup.guest_count)):
        if count:
            groups.append(AgentGroup("reference-supporter", team, count, bias=setup.bias))
    match = replace(
        base.match,
        supporter_budget={Team.HOME: setup.home_budget, Team.GUEST: setup.guest_budget},
    )
    return replace(base, match=match, agents=tuple(groups), transport="inprocess")


@dataclass
class MatchOutcome:
    seed: int
    away_half_occupancy: float
    ball_mean_x: float
    home_supporter_wins: int
    home_supporter_expected: float
    home_supporter_variance: float
    stalls: int
    ticks: int


def _play(cfg: RunConfig, seed: int) -> MatchOutcome:
    result = run_match(cfg.with_seed(seed), virtual_clock=True)
    home = sorted(a for a, t in _supporters(result).items() if t is Team.HOME)
    home_ids = np.array(home, dtype=np.int64)
    home_set = set(home)
    wins = 0
    expected = 0.0
    variance = 0.0
    for rec in result.records:
        if rec.winner is not REPEAT_REALITY and rec.winner in home_set:
            wins += 1
        d = rec.distribution
        p = math.fsum(d.probabilities[np.isin(d.agents, home_ids)].tolist()) if len(d) else 0.0
        expected += p
        variance += p * (1.0 - p)
    return MatchOutcome(
        seed=seed,
        away_half_occupancy=result.stats.half_occupancy["away_half"],
        ball_mean_x=result.stats.ball_mean[0],
        home_supporter_wins=wins,
        home_supporter_expected=expected,
        home_supporter_variance=variance,
        stalls=result.stats.stall_count,
        ticks=result.stats.ticks,
    )


def _supporters(result) -> dict[int, Team]:
    roster = result.header["config"]["roster"]
    return {a: Team.parse(t) for a, t in roster["supporters"]}


def bootstrap_mean_diff(a: Sequence[float], b: Sequence[float], resamples: int = 10_000, seed: int = 0, level: float = 0.95):
    """Mean of ``a`` minus mean of ``b`` with a percentile bootstrap interval."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    rng = np.random.default_rng(seed)
    ma = a[rng.integers(0, len(a), size=(resamples, len(a)))].mean(axis=1)
    mb = b[rng.integers(0, len(b), size=(resamples, len(b)))].mean(axis=1)
    diffs = ma - mb
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(diffs, [tail, 1.0 - tail])
    return float(a.mean() - b.mean()), (float(lo), float(hi))


def home_advantage_experiment(
    base: RunConfig,
    setups: Sequence[SupporterSetup] = (HOME_ONLY, SYMMETRIC),
    repetitions: int = 20,
    *,
    seeds: Optional[Sequence[int]] = None,
    control: str = "symmetric",
    resamples: int = 10_000,
    bootstrap_seed: int = 0,
    z_limit: float = 3.0,
) -> dict:
    """Run every setup over the same seeds and compare each against ``control``.

    Per setup the report holds per-match outcomes, mean away-half ball
    occupancy, realised versus analytically expected home-supporter
    selection share (the expectation accumulates the per-tick selection
    probabilities) and, for non-control setups, the occupancy difference to
    the control with a bootstrap interval.
    """
    seeds = list(seeds) if seeds is not None else [base.match.rng_seed + i for i in range(repetitions)]
    labels = [s.label for s in setups]
    if control not in labels:
        raise ValueError(f"control setup {control!r} not among {labels}")
    report: dict = {"seeds": seeds, "ticks": base.match.match_ticks, "control": control, "setups": {}}
    occupancy: dict[str, list[float]] = {}
    for setup in setups:
        cfg = config_for(base, setup)
        outcomes = [_play(cfg, seed) for seed in seeds]
        occ = [o.away_half_occupancy for o in outcomes]
        occupancy[setup.label] = occ
        total_ticks = sum(o.ticks for o in outcomes)
        wins = sum(o.home_supporter_wins for o in outcomes)
        expected = math.fsum(o.home_supporter_expected for o in outcomes)
        sd = math.sqrt(math.fsum(o.home_supporter_variance for o in outcomes))
        z = (wins - expected) / sd if sd > 0 else (0.0 if wins == expected else math.inf)
        report["setups"][setup.label] = {
            "setup": asdict(setup),
            "matches": [asdict(o) for o in outcomes],
            "mean_away_half_occupancy": float(np.mean(occ)),
            "home_supporter_share": wins / total_ticks,
            "home_supporter_expected_share": expected / total_ticks,
            "home_supporter_z": z,
            "share_consistent": abs(z) <= z_limit,
        }
    for label in labels:
        if label == control:
            continue
        diff, (lo, hi) = bootstrap_mean_diff(occupancy[label], occupancy[control], resamples, bootstrap_seed)
        report["setups"][label]["vs_control"] = {
            "mean_difference": diff,
            "ci95": [lo, hi],
            "excludes_zero": lo > 0 or hi < 0,
        }
    return report
