"""Match config files (TOML).

Example::

    [match]
    ticks = 500
    tick_period_ms = 50
    proposal_deadline_ms = 40
    seed = 7
    will_update_rate = 0.1
    bounds_check = "off"        # or "reject"
    transport = "inprocess"     # or "udp"

    [pitch]
    length = 105.0
    width = 68.0

    [supporters]
    home_budget = 1.0
    guest_budget = 0.0

    [[agents]]
    behavior = "reference-player"   # echo-player | reference-supporter | echo-supporter
    team = "home"
    count = 11
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

from ..model import BoundsCheck, MatchConfig, Pitch, Role, Team

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

BEHAVIORS = {
    "reference-player": Role.PLAYER,
    "echo-player": Role.PLAYER,
    "reference-supporter": Role.SUPPORTER,
    "echo-supporter": Role.SUPPORTER,
}
TRANSPORTS = ("inprocess", "udp")
# per-group only: the scheduler waits for these agents to join from other processes
GROUP_TRANSPORTS = TRANSPORTS + ("external",)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AgentGroup:
    behavior: str
    team: Team
    count: int = 1
    bias: float = 1.0
    max_speed: float = 0.8
    latency_ms: float = 0.0
    transport: Optional[str] = None

    @property
    def role(self) -> Role:
        return BEHAVIORS[self.behavior]


@dataclass(frozen=True)
class RunConfig:
    match: MatchConfig
    agents: tuple[AgentGroup, ...] = ()
    transport: str = "inprocess"
    deadline_margin_ms: float = 10.0
    join_timeout_s: float = 10.0
    source: Optional[str] = None

    def expected_supporters(self) -> dict[Team, int]:
        counts = {Team.HOME: 0, Team.GUEST: 0}
        for g in self.agents:
            if g.role is Role.SUPPORTER:
                counts[g.team] += g.count
        return counts

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, match=replace(self.match, rng_seed=int(seed)))

    def with_ticks(self, ticks: int) -> "RunConfig":
        return replace(self, match=replace(self.match, match_ticks=int(ticks)))


_MATCH_KEYS = {
    "ticks", "tick_period_ms", "proposal_deadline_ms", "seed", "will_update_rate",
    "bounds_check", "transport", "deadline_margin_ms", "join_timeout_s",
}
_AGENT_KEYS = {"behavior", "team", "count", "bias", "max_speed", "latency_ms", "transport"}


def _want(table: dict, key: str, kind, where: str, default: Any = None, check=None, why: str = ""):
    if key not in table:
        return default
    value = table[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigError(f"{where}.{key}: expected {kind.__name__}, got {value!r}")
    if check is not None and not check(value):
        raise ConfigError(f"{where}.{key}: {why or 'invalid value'} (got {value!r})")
    return value


def _unknown(table: dict, allowed: set, where: str) -> None:
    extra = sorted(set(table) - allowed)
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(extra)}")


def parse_config(data: dict, source: Optional[str] = None) -> RunConfig:
    _unknown(data, {"match", "pitch", "supporters", "agents"}, "config")
    m = data.get("match", {})
    _unknown(m, _MATCH_KEYS, "[match]")
    ticks = _want(m, "ticks", int, "[match]", 6000, lambda v: v >= 1, "must be >= 1")
    period = _want(m, "tick_period_ms", int, "[match]", 100, lambda v: v > 0, "must be > 0")
    deadline = _want(m, "proposal_deadline_ms", int, "[match]", min(80, period - 1),
                     lambda v: 0 < v < period, "must satisfy 0 < deadline < tick_period_ms")
    seed = _want(m, "seed", int, "[match]", 0, lambda v: 0 <= v < 2**64, "must be an unsigned 64-bit integer")
    alpha = _want(m, "will_update_rate", float, "[match]", 0.1, lambda v: 0 <= v <= 1, "must lie in [0, 1]")
    bounds = _want(m, "bounds_check", str, "[match]", "off", lambda v: v in ("off", "reject"), "must be 'off' or 'reject'")
    transport = _want(m, "transport", str, "[match]", "inprocess", lambda v: v in TRANSPORTS, f"must be one of {TRANSPORTS}")
    margin = _want(m, "deadline_margin_ms", float, "[match]", 10.0, lambda v: v >= 0, "must be >= 0")
    join_timeout = _want(m, "join_timeout_s", float, "[match]", 10.0, lambda v: v > 0, "must be > 0")

    p = data.get("pitch", {})
    _unknown(p, {"length", "width"}, "[pitch]")
    pitch = Pitch(
        _want(p, "length", float, "[pitch]", 105.0, lambda v: v > 0, "must be > 0"),
        _want(p, "width", float, "[pitch]", 68.0, lambda v: v > 0, "must be > 0"),
    )

    groups = []
    for i, a in enumerate(data.get("agents", [])):
        where = f"[[agents]] #{i + 1}"
        _unknown(a, _AGENT_KEYS, where)
        if "behavior" not in a:
            raise ConfigError(f"{where}.behavior: required")
        behavior = _want(a, "behavior", str, where, None, lambda v: v in BEHAVIORS, f"must be one of {sorted(BEHAVIORS)}")
        team_name = _want(a, "team", str, where, "home", lambda v: v.lower() in ("home", "guest", "away"), "must be home or guest")
        groups.append(AgentGroup(
            behavior=behavior,
            team=Team.parse(team_name),
            count=_want(a, "count", int, where, 1, lambda v: v >= 1, "must be >= 1"),
            bias=_want(a, "bias", float, where, 1.0, lambda v: v >= 0, "must be >= 0"),
            max_speed=_want(a, "max_speed", float, where, 0.8, lambda v: v > 0, "must be > 0"),
            latency_ms=_want(a, "latency_ms", float, where, 0.0, lambda v: v >= 0, "must be >= 0"),
            transport=_want(a, "transport", str, where, None, lambda v: v in GROUP_TRANSPORTS, f"must be one of {GROUP_TRANSPORTS}"),
        ))
    n_players = {t: sum(g.count for g in groups if g.role is Role.PLAYER and g.team is t) for t in Team}
    for t, n in n_players.items():
        if n > 11:
            raise ConfigError(f"[[agents]]: {n} {t.name.lower()} players configured, at most 11")

    if transport == "inprocess" and any(g.transport == "external" for g in groups):
        raise ConfigError("[[agents]]: external agents need [match] transport = \"udp\"")
    expected = {t: sum(g.count for g in groups if g.role is Role.SUPPORTER and g.team is t) for t in Team}
    s = data.get("supporters", {})
    _unknown(s, {"home_budget", "guest_budget"}, "[supporters]")
    default_budget = {t: (0.5 if all(expected.values()) else (1.0 if expected[t] else 0.0)) for t in Team}
    budget = {
        Team.HOME: _want(s, "home_budget", float, "[supporters]", default_budget[Team.HOME], lambda v: v >= 0, "must be >= 0"),
        Team.GUEST: _want(s, "guest_budget", float, "[supporters]", default_budget[Team.GUEST], lambda v: v >= 0, "must be >= 0"),
    }
    if budget[Team.HOME] + budget[Team.GUEST] > 1.0 + 1e-9:
        raise ConfigError("[supporters]: home_budget + guest_budget must not exceed 1")

    match = MatchConfig(
        tick_period_ms=period,
        proposal_deadline_ms=deadline,
        match_ticks=ticks,
        rng_seed=seed,
        pitch=pitch,
        bounds_check=BoundsCheck(bounds),
        will_update_rate=alpha,
        supporter_budget=budget,
        expected_supporters=expected,
    )
    return RunConfig(match, tuple(groups), transport, margin, join_timeout, source)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        # tomli reports "(at line L, column C)"
        raise ConfigError(f"{path}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        return parse_config(data, str(path))
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
