"""Line-oriented JSON traces.

Line 1 is a header with the schema version, protocol version, seed and a
config snapshot complete enough to replay the match. Each further line is one
tick record. Reals are written with 17 significant digits so re-reading
reproduces them bit for bit; see docs/trace.md for the field list.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Any, Iterable, Optional

import numpy as np

from ..consciousness import REPEAT_REALITY, ScoredProposal, SelectionDistribution
from ..model import (
    BoundsCheck,
    MatchConfig,
    Pitch,
    PlayerEntry,
    Roster,
    StateVector,
    Team,
    WillTable,
)
from ..scheduler import TickRecord
from ..wire.codec import VERSION as PROTOCOL_VERSION

SCHEMA = "qcss-trace"
SCHEMA_VERSION = 1


class TraceError(ValueError):
    pass


# -- writer ------------------------------------------------------------------

def _real(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    text = format(x, ".17g")
    if "e" not in text and "." not in text and "n" not in text:
        text += ".0"
    return text


def _dump(obj: Any, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(int(obj)))
    elif isinstance(obj, float):
        out.append(_real(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(",")
            out.append(json.dumps(str(k)))
            out.append(":")
            _dump(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _dump(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_line(obj: Any) -> str:
    out: list[str] = []
    _dump(obj, out)
    return "".join(out)


def _team_name(team) -> Any:
    return team.name.lower() if isinstance(team, Team) else int(team)


def _parse_team(value) -> Any:
    return Team.parse(value) if isinstance(value, str) else int(value)


def state_to_obj(s: StateVector) -> dict:
    return {"coords": s.coords.tolist(), "team": _team_name(s.possessing_team), "player": s.possessing_player}


def state_from_obj(obj: dict) -> StateVector:
    return StateVector(np.array(obj["coords"], dtype=np.float64), _parse_team(obj["team"]), obj["player"])


def will_to_obj(w: WillTable) -> list:
    return [[a, v] for a, v in zip(w.ids.tolist(), w.values.tolist())]


def config_to_obj(cfg: MatchConfig, roster: Roster, will: WillTable, lineup: StateVector) -> dict:
    return {
        "tick_period_ms": cfg.tick_period_ms,
        "proposal_deadline_ms": cfg.proposal_deadline_ms,
        "match_ticks": cfg.match_ticks,
        "rng_seed": cfg.rng_seed,
        "pitch": {"length": float(cfg.pitch.length), "width": float(cfg.pitch.width)},
        "bounds_check": cfg.bounds_check.value,
        "will_update_rate": float(cfg.will_update_rate),
        "supporter_budget": {_team_name(t): float(v) for t, v in sorted(cfg.supporter_budget.items())},
        "expected_supporters": {_team_name(t): int(v) for t, v in sorted(cfg.expected_supporters.items())},
        "roster": {
            "players": [[a, _team_name(e.team), e.shirt] for a, e in sorted(roster.players.items())],
            "supporters": [[a, _team_name(t)] for a, t in sorted(roster.supporters.items())],
        },
        "initial_will": will_to_obj(will),
        "starting_lineup": state_to_obj(lineup),
    }


def config_from_obj(obj: dict) -> MatchConfig:
    r = obj["roster"]
    roster = Roster(
        players={a: PlayerEntry(Team.parse(t), s) for a, t, s in r["players"]},
        supporters={a: Team.parse(t) for a, t in r["supporters"]},
    )
    will = WillTable({a: v for a, v in obj["initial_will"]}, roster.players)
    return MatchConfig(
        roster=roster,
        starting_lineup=state_from_obj(obj["starting_lineup"]),
        initial_will=will,
        tick_period_ms=obj["tick_period_ms"],
        proposal_deadline_ms=obj["proposal_deadline_ms"],
        match_ticks=obj["match_ticks"],
        rng_seed=obj["rng_seed"],
        pitch=Pitch(obj["pitch"]["length"], obj["pitch"]["width"]),
        bounds_check=BoundsCheck(obj["bounds_check"]),
        will_update_rate=obj["will_update_rate"],
        supporter_budget={Team.parse(k): v for k, v in obj["supporter_budget"].items()},
        expected_supporters={Team.parse(k): v for k, v in obj["expected_supporters"].items()},
    )


def record_to_obj(rec: TickRecord) -> dict:
    states: list[dict] = []
    index: dict[bytes, int] = {}

    def ref(s: StateVector) -> int:
        k = s.key()
        if k not in index:
            index[k] = len(states)
            states.append(state_to_obj(s))
        return index[k]

    reality = ref(rec.reality)
    proposals = [[a, arrival, ref(rec.proposals[a])] for a, arrival in rec.proposals_received]
    return {
        "tick": rec.tick,
        "reality": reality,
        "states": states,
        "proposals": proposals,
        "duplicates": [list(d) for d in rec.duplicates],
        "invalid": [list(d) for d in rec.invalid],
        "eligible": sorted(rec.eligible),
        "scored": [[s.agent, float(s.sc_value), s.eligible] for s in rec.scored],
        "distribution": [[a, p] for a, p in rec.distribution.entries],
        "winner": None if rec.winner is REPEAT_REALITY else rec.winner,
        "will": will_to_obj(rec.will_snapshot),
    }


def record_from_obj(obj: dict, players: set) -> TickRecord:
    states = [state_from_obj(s) for s in obj["states"]]
    will_ids = np.array([a for a, _ in obj["will"]], dtype=np.int64)
    will_vals = np.array([v for _, v in obj["will"]], dtype=np.float64)
    will = WillTable.from_arrays(will_ids, will_vals, np.array([a in players for a in will_ids.tolist()], dtype=bool))
    dist = obj["distribution"]
    winner = obj["winner"]
    return TickRecord(
        tick=obj["tick"],
        reality=states[obj["reality"]],
        proposals_received=tuple((a, arrival) for a, arrival, _ in obj["proposals"]),
        eligible=frozenset(obj["eligible"]),
        distribution=SelectionDistribution([a for a, _ in dist], [p for _, p in dist]),
        winner=REPEAT_REALITY if winner is None else winner,
        will_snapshot=will,
        scored=tuple(ScoredProposal(a, v, e) for a, v, e in obj["scored"]),
        proposals={a: states[i] for a, _, i in obj["proposals"]},
        duplicates=tuple((a, t) for a, t in obj["duplicates"]),
        invalid=tuple((a, r) for a, r in obj["invalid"]),
    )


# -- files -------------------------------------------------------------------

@dataclass
class TraceFile:
    header: dict
    records: list[TickRecord]

    @property
    def config(self) -> MatchConfig:
        return config_from_obj(self.header["config"])

    @property
    def seed(self) -> int:
        return int(self.header["seed"])


def make_header(cfg: MatchConfig, roster: Roster, will: WillTable, lineup: StateVector, extra: Optional[dict] = None) -> dict:
    header = {
        "schema": SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "protocol_version": PROTOCOL_VERSION,
        "seed": cfg.rng_seed,
        "config": config_to_obj(cfg, roster, will, lineup),
    }
    if extra:
        header["run"] = extra
    return header


class TraceWriter:
    """Single writer; records must arrive in tick order."""

    def __init__(self, path: str | Path, header: dict):
        self.path = Path(path)
        self._fh: IO[str] = open(self.path, "w", encoding="utf-8", newline="\n")
        self._fh.write(dumps_line(header) + "\n")
        self._next_tick = 0

    def write(self, rec: TickRecord) -> None:
        if rec.tick != self._next_tick:
            raise TraceError(f"record for tick {rec.tick} written out of order (expected {self._next_tick})")
        self._fh.write(dumps_line(record_to_obj(rec)) + "\n")
        self._next_tick += 1

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "TraceWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def write_trace(path: str | Path, trace: TraceFile) -> None:
    with TraceWriter(path, trace.header) as w:
        for rec in trace.records:
            w.write(rec)


def _check_header(header: dict) -> None:
    if header.get("schema") != SCHEMA:
        raise TraceError(f"not a trace file (schema {header.get('schema')!r})")
    if header.get("schema_version") != SCHEMA_VERSION:
        raise TraceError(f"trace schema version {header.get('schema_version')!r} is not supported (expected {SCHEMA_VERSION})")


def read_trace(path: str | Path) -> TraceFile:
    with open(path, encoding="utf-8") as fh:
        return parse_trace(fh)


def parse_trace(lines: Iterable[str]) -> TraceFile:
    it = iter(lines)
    try:
        header = json.loads(next(it))
    except StopIteration:
        raise TraceError("empty trace") from None
    _check_header(header)
    players = {row[0] for row in header["config"]["roster"]["players"]}
    records = []
    for lineno, line in enumerate(it, start=2):
        if not line.strip():
            continue
        try:
            records.append(record_from_obj(json.loads(line), players))
        except (KeyError, ValueError, TypeError) as exc:
            raise TraceError(f"line {lineno}: {exc}") from None
    return TraceFile(header, records)
