"""Scale benchmark: one scheduler fed by a large in-process supporter swarm."""
from __future__ import annotations

import statistics
import time

from ..agents.reference import reference_supporter
from ..agents.sdk import EchoBehavior
from ..agents.swarm import InProcessSwarm
from ..model import MatchConfig, Role, Team
from ..scheduler import Scheduler


def bench_swarm(supporters: int = 10_000, ticks: int = 50, seed: int = 0, behavior: str = "echo", players: int = 0) -> dict:
    """Median and max of the scoring + selection stage, plus whole-tick timings, in milliseconds.

    ``behavior`` is ``echo`` (everyone repeats reality) or ``biased`` (each
    supporter nudges the ball, so previous proposals are distinct objects).
    """
    cfg = MatchConfig(
        match_ticks=ticks,
        rng_seed=seed,
        supporter_budget={Team.HOME: 1.0, Team.GUEST: 0.0},
        expected_supporters={Team.HOME: supporters, Team.GUEST: 0},
    )
    sched = Scheduler(cfg)
    swarm = InProcessSwarm()
    for team, n in ((Team.HOME, (players + 1) // 2), (Team.GUEST, players // 2)):
        if n:
            swarm.add(sched, n, lambda me: EchoBehavior(), Role.PLAYER, team)
    if behavior == "echo":
        factory = lambda me: EchoBehavior()
    elif behavior == "biased":
        factory = lambda me: reference_supporter(me.team, 1.0)
    else:
        raise ValueError(f"unknown behavior {behavior!r}")
    t0 = time.perf_counter()
    swarm.add(sched, supporters, factory, Role.SUPPORTER, Team.HOME)
    setup_s = time.perf_counter() - t0
    sched.start()
    selection, whole, propose = [], [], []
    while not sched.finished:
        tick, reality = sched.begin_tick()
        t0 = time.perf_counter()
        props = swarm.proposals(tick, reality)
        t1 = time.perf_counter()
        sched.run_tick(props)
        t2 = time.perf_counter()
        propose.append(t1 - t0)
        whole.append(t2 - t1)
        selection.append(sched.last_selection_seconds)
    ms = lambda xs: [1000.0 * x for x in xs]
    return {
        "supporters": supporters,
        "players": players,
        "behavior": behavior,
        "ticks": ticks,
        "setup_ms": 1000.0 * setup_s,
        "selection_median_ms": statistics.median(ms(selection)),
        "selection_max_ms": max(ms(selection)),
        "run_tick_median_ms": statistics.median(ms(whole)),
        "swarm_propose_median_ms": statistics.median(ms(propose)),
    }
