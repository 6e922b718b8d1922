"""``qcss`` command line."""
from __future__ import annotations

import argparse
import importlib
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from ..agents.reference import ArchetypeKind, PlayerArchetype, default_archetype, reference_player, reference_supporter
from ..agents.sdk import AgentBehavior, EchoBehavior, Identity, run_agent_loop
from ..model import Pitch, Role, Team
from ..wire.transport import UdpConnection
from .bench import bench_swarm
from .config import ConfigError, load_config
from .experiment import HOME_ONLY, NO_SUPPORTERS, SYMMETRIC, home_advantage_experiment
from .match import MatchError, replay, run_match
from .stats import stats_for_trace
from .trace import TraceError, read_trace

log = logging.getLogger("qcss")

SETUPS = {s.label: s for s in (HOME_ONLY, SYMMETRIC, NO_SUPPORTERS)}


def _print_json(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=False, default=str)
    sys.stdout.write("\n")


def _load(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "ticks", None) is not None:
        cfg = cfg.with_ticks(args.ticks)
    return cfg


# -- subcommands -------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = _load(args)
    trace = args.trace or f"trace-{cfg.match.rng_seed}.jsonl"
    t0 = time.perf_counter()
    result = run_match(cfg, trace, virtual_clock=args.virtual_clock, keep_records=False)
    elapsed = time.perf_counter() - t0
    s = result.stats
    print(f"ticks {s.ticks}  stalls {s.stall_count}  seed {cfg.match.rng_seed}  {elapsed:.1f}s")
    print(f"ball mean x {s.ball_mean[0]:.2f}  away-half occupancy {s.half_occupancy['away_half']:.3f}")
    print(f"trace written to {trace}")
    return 0


def cmd_serve(args) -> int:
    cfg = _load(args)
    trace = args.trace or f"trace-{cfg.match.rng_seed}.jsonl"
    if cfg.transport != "udp":
        raise ConfigError(f"{args.config}: serve needs [match] transport = \"udp\"")
    result = run_match(cfg, trace, bind=(args.host, args.port), keep_records=False)
    s = result.stats
    print(f"ticks {s.ticks}  stalls {s.stall_count}  trace {trace}")
    return 0


def cmd_replay(args) -> int:
    report = replay(read_trace(args.trace))
    if report.identical:
        print(f"identical: {report.ticks} ticks reproduced")
        return 0
    for line in report.mismatches[: args.max_report]:
        print(line)
    print(f"MISMATCH: {len(report.mismatches)} differences over {report.ticks} ticks")
    return 1


def cmd_stats(args) -> int:
    _print_json(stats_for_trace(read_trace(args.trace)).to_dict())
    return 0


def cmd_experiment(args) -> int:
    cfg = _load(args)
    setups = [SETUPS[name] for name in args.setups]
    report = home_advantage_experiment(cfg, setups, args.reps, control=args.control, resamples=args.resamples)
    for label, r in report["setups"].items():
        line = (f"{label:>10}: away-half occupancy {r['mean_away_half_occupancy']:.3f}  "
                f"home supporter share {r['home_supporter_share']:.4f} "
                f"(expected {r['home_supporter_expected_share']:.4f}, z {r['home_supporter_z']:+.2f})")
        print(line)
        if "vs_control" in r:
            v = r["vs_control"]
            print(f"{'':>10}  vs {report['control']}: {v['mean_difference']:+.3f} "
                  f"95% CI [{v['ci95'][0]:+.3f}, {v['ci95'][1]:+.3f}]")
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2))
        print(f"report written to {args.out}")
    return 0


def cmd_bench(args) -> int:
    result = bench_swarm(args.supporters, args.ticks, args.seed, args.behavior, args.players)
    _print_json(result)
    return 0


def _load_factory(spec: str):
    module, _, name = spec.partition(":")
    if not name:
        raise ValueError(f"--behavior {spec!r}: expected module:callable")
    return getattr(importlib.import_module(module), name)


def _agent_behavior(args, me: Identity, pitch: Pitch) -> AgentBehavior:
    if args.behavior:
        return _load_factory(args.behavior)(me, args.seed)
    if args.archetype == "echo":
        return EchoBehavior()
    if me.role is Role.SUPPORTER:
        return reference_supporter(me.team, args.bias, pitch)
    arch = default_archetype(me.team, me.shirt, pitch, args.max_speed)
    if args.archetype != "reference":
        arch = PlayerArchetype(ArchetypeKind(args.archetype), arch.home_position, arch.max_speed)
    return reference_player(arch, me, pitch)


def cmd_agent(args) -> int:
    role = Role.PLAYER if args.role == "player" else Role.SUPPORTER
    team = Team.parse(args.team)
    pitch = Pitch(args.pitch_length, args.pitch_width)
    if role is Role.PLAYER and args.shirt is None and args.archetype != "echo" and not args.behavior:
        # the join acknowledgement does not echo an assigned shirt, and the
        # reference player needs its own formation slot
        raise ValueError("--shirt is required for reference players")
    conn = UdpConnection(args.host, args.port)
    try:
        ack = conn.join(role, team, args.shirt, timeout=args.join_timeout)
        me = Identity(ack.agent_id, role, team, args.shirt, ack.initial_w)
        log.info("joined as agent %d (w=%.6g, seed %d)", ack.agent_id, ack.initial_w, args.seed)
        summary = run_agent_loop(_agent_behavior(args, me, pitch), conn, ack, me, args.margin_ms, args.loss_timeout)
    finally:
        conn.close()
    print(f"agent {summary.agent_id}: {summary.proposals_sent} proposals, final tick {summary.final_tick}"
          + (f", error {summary.error}" if summary.error else "") + (", lost contact" if summary.lost else ""))
    return 0 if not (summary.error or summary.lost) else 1


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qcss", description="Distributed football simulation scheduler and agents.")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="play a match from a config file and write its trace")
    p.add_argument("config")
    p.add_argument("--seed", type=int, help="override [match] seed")
    p.add_argument("--ticks", type=int, help="override [match] ticks")
    p.add_argument("--trace", help="trace output path (default trace-<seed>.jsonl)")
    p.add_argument("--virtual-clock", action="store_true", help="in-process agents, deterministic timing")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("serve", help="run the scheduler over UDP, waiting for external agents to join")
    p.add_argument("config")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=4646)
    p.add_argument("--seed", type=int)
    p.add_argument("--ticks", type=int)
    p.add_argument("--trace")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="re-run a trace through a fresh scheduler and compare")
    p.add_argument("trace")
    p.add_argument("--max-report", type=int, default=20, help="mismatch lines to print")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("stats", help="match statistics of a trace, as JSON")
    p.add_argument("trace")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("experiment", help="multi-match experiments")
    exp = p.add_subparsers(dest="experiment", required=True)
    h = exp.add_parser("home-advantage", help="supporter setups compared over seeded matches")
    h.add_argument("config")
    h.add_argument("--reps", type=int, default=20, help="matches per setup")
    h.add_argument("--seed", type=int, help="first seed (default: config seed)")
    h.add_argument("--ticks", type=int)
    h.add_argument("--setups", nargs="+", choices=sorted(SETUPS), default=["home-only", "symmetric"])
    h.add_argument("--control", default="symmetric", choices=sorted(SETUPS))
    h.add_argument("--resamples", type=int, default=10_000, help="bootstrap resamples")
    h.add_argument("--out", help="write the full report as JSON")
    h.set_defaults(func=cmd_experiment)

    p = sub.add_parser("bench", help="benchmarks")
    b = p.add_subparsers(dest="bench", required=True)
    s = b.add_parser("swarm", help="scheduler selection time with a large supporter swarm")
    s.add_argument("--supporters", type=int, default=10_000)
    s.add_argument("--players", type=int, default=0, help="echo players alongside the swarm")
    s.add_argument("--ticks", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--behavior", choices=["echo", "biased"], default="echo")
    s.set_defaults(func=cmd_bench)

    p = sub.add_parser("agent", help="run one agent against a scheduler over UDP")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=4646)
    p.add_argument("--role", choices=["player", "supporter"], required=True)
    p.add_argument("--team", choices=["home", "guest", "away"], required=True)
    p.add_argument("--shirt", type=int, help="requested shirt number (players)")
    p.add_argument("--archetype", default="reference",
                   choices=["reference", "echo"] + [k.value for k in ArchetypeKind],
                   help="reference picks the archetype from the shirt")
    p.add_argument("--behavior", help="custom behaviour as module:callable, called with (identity, seed)")
    p.add_argument("--seed", type=int, default=0, help="handed to custom behaviours")
    p.add_argument("--bias", type=float, default=1.0, help="supporter nudge in metres")
    p.add_argument("--max-speed", type=float, default=0.8)
    p.add_argument("--pitch-length", type=float, default=105.0)
    p.add_argument("--pitch-width", type=float, default=68.0)
    p.add_argument("--margin-ms", type=float, default=10.0, help="stop stepping this long before the deadline")
    p.add_argument("--join-timeout", type=float, default=10.0)
    p.add_argument("--loss-timeout", type=float, default=30.0, help="give up after this much silence")
    p.set_defaults(func=cmd_agent)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, TraceError, MatchError, TimeoutError, ValueError, OSError) as exc:
        print(f"qcss: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
