"""The nine acceptance criteria, each at its stated tolerance.

Every test prints one PASS/FAIL line (also repeated in the pytest terminal
summary). ``QCSS_FUZZ_SECONDS`` sets the decoder fuzz duration, default 60.
"""
from __future__ import annotations

import math
import os
import struct
import time

import numpy as np
import pytest

from conftest import verdict
from qcss.consciousness import (
    REPEAT_REALITY,
    SelectionDistribution,
    distribution_from_arrays,
    make_rng,
    sample,
    score_kernel,
    soccer_consciousness,
    update_will_arrays,
)
from qcss.model import MatchConfig, Role, StateVector, Team, WillTable
from qcss.runner.bench import bench_swarm
from qcss.runner.config import load_config
from qcss.runner.experiment import HOME_ONLY, SYMMETRIC, home_advantage_experiment
from qcss.runner.match import replay, run_match, winner_sequence
from qcss.runner.trace import read_trace
from qcss.scheduler import Proposal, Scheduler
from qcss.wire import DecodeError, Error, ErrorCode, Join, JoinAck, MatchEnd, ProposalMsg, Reality, decode, encode

FUZZ_SECONDS = float(os.environ.get("QCSS_FUZZ_SECONDS", "60"))


# -- 1 -------------------------------------------------------------------------------

def test_criterion_1_probabilities_sum_to_one():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    negative = 0
    fallbacks = 0
    # both ends of the size range, the rest log-uniform in between
    sizes = [1, 10_000] + [int(np.exp(rng.uniform(0, np.log(10_000)))) for _ in range(998)]
    for n in sizes:
        is_player = rng.random(n) < rng.random()
        will = rng.exponential(1.0, n) * (rng.random(n) < 0.95)
        dist = 10.0 ** rng.uniform(-6, 3, n) * (rng.random(n) < 0.8)
        eligible = rng.random(n) < rng.uniform(0.5, 1.0)
        eligible[0], will[0] = True, 1.0   # at least one eligible agent with positive will
        sc = score_kernel(is_player, will, dist)
        d = distribution_from_arrays(np.arange(n), sc, eligible)
        if not len(d):
            # every eligible score is 0: the repeat-reality fallback, nothing to normalise
            fallbacks += 1
            continue
        p = d.probabilities
        negative += int((p < 0).sum())
        worst = max(worst, abs(math.fsum(p.tolist()) - 1.0), abs(float(p.sum()) - 1.0))
        assert not p[~eligible].any()
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and negative == 0 and elapsed < 10.0
    verdict(1, "probabilities sum to 1", ok,
            f"1000 sets, n in [{min(sizes)}, {max(sizes)}], max |sum-1| {worst:.2e}, negatives {negative}, "
            f"{fallbacks} zero-score fallbacks, {elapsed:.2f}s")
    assert ok


# -- 2 -------------------------------------------------------------------------------

REALITY = StateVector.zeros()


def _at(d: float) -> StateVector:
    return REALITY.with_ball((d, 0.0))


def _dist_for(rows):
    scored = soccer_consciousness(rows, REALITY)
    return distribution_from_arrays(np.array([a for a, _ in scored]), np.array([v for _, v in scored]),
                                    np.ones(len(scored), dtype=bool))


def test_criterion_2_consciousness_branches():
    checks = {}
    checks["w/d"] = dict(soccer_consciousness([(1, Role.PLAYER, 1.0, _at(2.0))], REALITY)) == {1: 0.5}
    worked = dict(soccer_consciousness(
        [(1, Role.PLAYER, 1.0, _at(2.0)), (2, Role.PLAYER, 1.0, _at(4.0)), (3, Role.PLAYER, 1.0, _at(0.0))], REALITY))
    checks["worked (0.5, 0.25, 0.5)"] = [worked[1], worked[2], worked[3]] == [0.5, 0.25, 0.5]
    fallback = dict(soccer_consciousness(
        [(1, Role.SUPPORTER, 0.3, _at(0.0)), (2, Role.SUPPORTER, 0.7, _at(0.0))], REALITY))
    checks["all d=0 -> w"] = fallback == {1: 0.3, 2: 0.7}
    scoped = dict(soccer_consciousness(
        [(1, Role.PLAYER, 1.0, _at(0.5)), (2, Role.SUPPORTER, 0.2, _at(4.0)),
         (3, Role.SUPPORTER, 0.4, _at(0.0)), (4, Role.PLAYER, 1.0, _at(0.0))], REALITY))
    checks["role-scoped max"] = scoped == {1: 2.0, 2: 0.05, 3: 0.05, 4: 2.0}

    rng = np.random.default_rng(202)
    worst = 0.0
    fixtures = [
        [(1, Role.PLAYER, 1.0, _at(2.0)), (2, Role.PLAYER, 1.0, _at(4.0)), (3, Role.PLAYER, 1.0, _at(0.0))],
        [(1, Role.SUPPORTER, 0.3, _at(0.0)), (2, Role.SUPPORTER, 0.7, _at(0.0))],
    ]
    for _ in range(200):
        n = int(rng.integers(1, 30))
        fixtures.append([
            (i, Role.PLAYER if rng.random() < 0.5 else Role.SUPPORTER, float(rng.exponential()),
             _at(float(rng.choice([0.0, rng.uniform(0.01, 80.0)]))))
            for i in range(1, n + 1)
        ])
    for rows in fixtures:
        if not any(w > 0 for _, _, w, _ in rows):
            continue
        base = _dist_for(rows).probabilities
        for c in (1e-6, 1.0, 1e6):
            scaled = _dist_for([(a, r, c * w, s) for a, r, w, s in rows]).probabilities
            worst = max(worst, float(np.abs(scaled - base).max()))
    checks["scale invariance <= 1e-12"] = worst <= 1e-12
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    verdict(2, "consciousness branches", ok,
            f"fixtures ok, max scale deviation {worst:.1e}" if ok else f"failed: {failed}, scale dev {worst:.1e}")
    assert ok


# -- 3 -------------------------------------------------------------------------------

def test_criterion_3_late_and_invalid_exclusion():
    ticks = 10_000
    cfg = MatchConfig(match_ticks=ticks, rng_seed=303, will_update_rate=0.1,
                      expected_supporters={Team.HOME: 2, Team.GUEST: 1})
    sched = Scheduler(cfg)
    agents = [sched.register_agent(Role.PLAYER, Team.HOME) for _ in range(3)]
    agents += [sched.register_agent(Role.PLAYER, Team.GUEST) for _ in range(2)]
    agents += [sched.register_agent(Role.SUPPORTER, t) for t in (Team.HOME, Team.HOME, Team.GUEST)]
    sched.start()
    rng = np.random.default_rng(303)
    deadline_us = cfg.proposal_deadline_ms * 1000
    nan_state = StateVector(np.full(46, np.nan))
    prev_ok: set = set()
    violations = 0
    excluded_checked = 0
    stalls = 0
    stall_ok = True
    while not sched.finished:
        tick, reality = sched.begin_tick()
        blackout = rng.random() < 0.02
        props = []
        valid_now = set()
        for a in agents:
            if blackout or rng.random() < 0.1:
                continue  # silent
            arrival = int(rng.integers(0, deadline_us * 2)) if rng.random() < 0.15 else int(rng.integers(0, deadline_us))
            invalid = rng.random() < 0.05
            state = nan_state if invalid else reality.with_ball(tuple(reality.coords[:2] + rng.normal(0, 1, 2)))
            props.append(Proposal(a, state, arrival))
            if arrival < deadline_us and not invalid:
                valid_now.add(a)
        rec = sched.run_tick(props)
        expected = valid_now if tick == 0 else valid_now & prev_ok
        excluded = set(agents) - expected
        excluded_checked += len(excluded)
        if rec.eligible != expected:
            violations += 1
        for a in excluded:
            if rec.distribution.probability(a) != 0.0 or rec.winner == a:
                violations += 1
        if not expected:
            stalls += 1
            stall_ok &= rec.winner is REPEAT_REALITY and rec.next_reality is reality
            stall_ok &= sched.current_reality == reality
        prev_ok = valid_now
    ok = violations == 0 and stall_ok and stalls > 0
    verdict(3, "late/invalid exclusion", ok,
            f"{ticks} ticks, {excluded_checked} exclusions checked, {violations} violations, {stalls} empty-set stalls")
    assert ok


# -- 4 -------------------------------------------------------------------------------

def test_criterion_4_sampling_fidelity():
    t0 = time.perf_counter()
    d = SelectionDistribution([1, 2, 3], [0.25, 0.25, 0.5])
    rng = make_rng(404)
    draws = np.array([sample(d, rng) for _ in range(100_000)])
    freq = np.array([(draws == a).mean() for a in (1, 2, 3)])
    linf = float(np.abs(freq - [0.25, 0.25, 0.5]).max())
    again = make_rng(404)
    same = np.array_equal(draws, [sample(d, again) for _ in range(100_000)])
    elapsed = time.perf_counter() - t0
    ok = linf <= 0.01 and same and elapsed < 5.0
    verdict(4, "sampling fidelity", ok, f"L-inf {linf:.4f}, reproducible {same}, {elapsed:.2f}s")
    assert ok


# -- 5 -------------------------------------------------------------------------------

def _random_message(rng):
    kind = int(rng.integers(0, 6))
    state = lambda: StateVector(rng.normal(0, 60, 46), Team(int(rng.integers(0, 2))), int(rng.integers(1, 12)))
    u32 = lambda: int(rng.integers(0, 2**32))
    if kind == 0:
        role = Role(int(rng.integers(0, 2)))
        return Join(role, Team(int(rng.integers(0, 2))), int(rng.integers(1, 12)) if role is Role.PLAYER else None)
    if kind == 1:
        return JoinAck(u32(), float(rng.random()), u32(), u32())
    if kind == 2:
        return Reality(u32(), state(), float(rng.exponential()))
    if kind == 3:
        return ProposalMsg(u32(), u32(), state())
    if kind == 4:
        return MatchEnd(u32())
    return Error(ErrorCode(int(rng.integers(1, 6))))


def _fuzz_input(rng, corpus):
    mode = int(rng.integers(0, 5))
    if mode == 0:
        return rng.bytes(int(rng.integers(0, 600)))
    base = bytearray(corpus[int(rng.integers(0, len(corpus)))])
    if mode == 1:
        for _ in range(int(rng.integers(1, 8))):
            base[int(rng.integers(0, len(base)))] = int(rng.integers(0, 256))
        return bytes(base)
    if mode == 2:
        return bytes(base[: int(rng.integers(0, len(base) + 1))])
    if mode == 3:
        return bytes(base) + rng.bytes(int(rng.integers(1, 40)))
    # valid header, arbitrary type byte and payload
    return b"QCSS\x01" + bytes([int(rng.integers(0, 256))]) + rng.bytes(int(rng.integers(0, 500)))


@pytest.mark.slow
def test_criterion_5_codec():
    rng = np.random.default_rng(505)
    messages = [_random_message(rng) for _ in range(1000)]
    round_trip = sum(decode(encode(m)) == m for m in messages)

    # single-byte corruption: every position and every replacement value for one
    # message of each type, random positions for the rest
    silent = 0
    corrupted = 0
    exemplars = {type(m): m for m in messages}
    for m in exemplars.values():
        b = encode(m)
        for pos in range(len(b)):
            for v in range(256):
                if v == b[pos]:
                    continue
                mutated = bytearray(b)
                mutated[pos] = v
                corrupted += 1
                try:
                    silent += decode(bytes(mutated)) == m
                except DecodeError:
                    pass
    for m in messages:
        b = encode(m)
        for pos in rng.choice(len(b), min(len(b), 16), replace=False):
            mutated = bytearray(b)
            mutated[int(pos)] ^= int(rng.integers(1, 256))
            corrupted += 1
            try:
                silent += decode(bytes(mutated)) == m
            except DecodeError:
                pass

    corpus = [encode(m) for m in messages]
    crashes = []
    fuzzed = 0
    end = time.monotonic() + FUZZ_SECONDS
    while time.monotonic() < end:
        for _ in range(500):
            data = _fuzz_input(rng, corpus)
            fuzzed += 1
            try:
                m = decode(data)
            except DecodeError:
                continue
            except Exception as exc:  # anything else is a decoder bug
                crashes.append((data.hex(), repr(exc)))
                continue
            if encode(m) != data:
                crashes.append((data.hex(), "accepted bytes that do not re-encode identically"))
    ok = round_trip == 1000 and silent == 0 and not crashes
    verdict(5, "codec round trip, corruption and fuzz", ok,
            f"round trip {round_trip}/1000, {corrupted} corruptions with {silent} silent, "
            f"{fuzzed} fuzz inputs in {FUZZ_SECONDS:.0f}s with {len(crashes)} crashes")
    assert ok, crashes[:3]


# -- 6 -------------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_6_loopback_match(tmp_path):
    cfg = load_config("configs/loopback.toml")
    trace = tmp_path / "loopback.jsonl"
    t0 = time.perf_counter()
    result = run_match(cfg, trace)
    elapsed = time.perf_counter() - t0
    s = result.stats
    non_stall = 1.0 - s.stall_count / s.ticks
    players = sum(g.count for g in cfg.agents if g.role is Role.PLAYER)
    supporters = sum(g.count for g in cfg.agents if g.role is Role.SUPPORTER)
    loaded = read_trace(trace)
    report = replay(loaded)
    same_winners = winner_sequence(loaded.records) == winner_sequence(result.records)
    ok = (s.ticks == 500 and players == 22 and supporters == 100 and non_stall >= 0.95
          and report.identical and same_winners and elapsed <= 35.0)
    verdict(6, "loopback match and replay", ok,
            f"{players}+{supporters} agents over UDP, {s.ticks} ticks, non-stall {non_stall:.3f}, "
            f"replay identical {report.identical}, {elapsed:.1f}s")
    assert ok, report.mismatches[:5]


# -- 7 -------------------------------------------------------------------------------

def test_criterion_7_swarm_benchmark():
    result = bench_swarm(10_000, ticks=50, seed=707, behavior="echo")
    biased = bench_swarm(10_000, ticks=20, seed=707, behavior="biased")
    ok = result["selection_median_ms"] < 10.0
    verdict(7, "10,000-supporter selection time", ok,
            f"echo median {result['selection_median_ms']:.2f} ms (max {result['selection_max_ms']:.2f}), "
            f"distinct-proposal median {biased['selection_median_ms']:.2f} ms")
    assert ok


# -- 8 -------------------------------------------------------------------------------

def test_criterion_8_will_constraints():
    rng = np.random.default_rng(808)
    n_players, n_supporters = 22, 150
    ids = np.arange(1, n_players + n_supporters + 1, dtype=np.int64)
    is_player = np.arange(len(ids)) < n_players
    pw = rng.exponential(1.0, n_players)
    pw *= n_players / math.fsum(pw.tolist())
    sw = rng.exponential(1.0, n_supporters)
    sw *= 0.85 / math.fsum(sw.tolist())
    table = WillTable.from_arrays(ids, np.concatenate([pw, sw]), is_player)
    supporter_initial = math.fsum(table.values[~is_player].tolist())
    worst_p = worst_s = 0.0
    negative = 0
    identity = True
    for i in range(10_000):
        sc = rng.exponential(1.0, len(ids)) * 10.0 ** rng.uniform(-3, 3)
        sc[rng.random(len(ids)) < 0.2] = 0.0
        if i % 50 == 0:
            same = update_will_arrays(table, sc, 0.0)
            identity &= same == table and same.values.tobytes() == table.values.tobytes()
        table = update_will_arrays(table, sc, float(rng.uniform(0.0, 1.0)))
        v = table.values
        negative += int((v < 0).sum())
        worst_p = max(worst_p, abs(math.fsum(v[is_player].tolist()) - n_players))
        worst_s = max(worst_s, abs(math.fsum(v[~is_player].tolist()) - supporter_initial))
    ok = worst_p <= 1e-9 and worst_s <= 1e-9 and supporter_initial <= 1.0 and identity and negative == 0
    verdict(8, "will constraints", ok,
            f"player sum drift {worst_p:.1e}, supporter sum drift {worst_s:.1e} "
            f"(initial {supporter_initial:.3f}), alpha=0 identity {identity}")
    assert ok


# -- 9 -------------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_9_home_advantage():
    base = load_config("configs/home_advantage.toml")
    t0 = time.perf_counter()
    report = home_advantage_experiment(base, (HOME_ONLY, SYMMETRIC), repetitions=20)
    elapsed = time.perf_counter() - t0
    home = report["setups"]["home-only"]
    ctrl = report["setups"]["symmetric"]
    vs = home["vs_control"]
    ticks_ok = report["ticks"] == 2000 and len(report["seeds"]) == 20
    ok = (ticks_ok and home["share_consistent"] and vs["excludes_zero"] and vs["mean_difference"] > 0
          and home["mean_away_half_occupancy"] > ctrl["mean_away_half_occupancy"])
    verdict(9, "home advantage", ok,
            f"share {home['home_supporter_share']:.4f} vs expected {home['home_supporter_expected_share']:.4f} "
            f"(z {home['home_supporter_z']:+.2f}); away-half occupancy {home['mean_away_half_occupancy']:.3f} "
            f"vs {ctrl['mean_away_half_occupancy']:.3f}, diff {vs['mean_difference']:+.3f} "
            f"CI [{vs['ci95'][0]:+.3f}, {vs['ci95'][1]:+.3f}], {elapsed:.0f}s")
    assert ok
