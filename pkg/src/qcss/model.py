"""Domain vocabulary: state vectors, roles, rosters, will tables and match configuration."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, Optional

import numpy as np

N_SHIRTS = 11
N_COORDS = 46
MAX_PLAYERS = 22
BOUNDS_MARGIN = 5.0
SUM_TOL = 1e-9

AgentId = int


class Team(enum.IntEnum):
    HOME = 0
    GUEST = 1

    @property
    def opponent(self) -> "Team":
        return Team.GUEST if self is Team.HOME else Team.HOME

    @classmethod
    def parse(cls, value: "str | int | Team") -> "Team":
        if isinstance(value, Team):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            aliases = {"home": cls.HOME, "guest": cls.GUEST, "away": cls.GUEST}
            if key not in aliases:
                raise ValueError(f"unknown team {value!r}")
            return aliases[key]
        return cls(value)


class Role(enum.IntEnum):
    PLAYER = 0
    SUPPORTER = 1


class BoundsCheck(enum.Enum):
    OFF = "off"
    REJECT = "reject"


class InvalidReason(enum.Enum):
    NON_FINITE = "NonFinite"
    BAD_POSSESSION = "BadPossession"
    OUT_OF_BOUNDS = "OutOfBounds"


@dataclass(frozen=True)
class Position:
    x: float
    y: float


@dataclass(frozen=True)
class Pitch:
    length: float = 105.0
    width: float = 68.0

    def __post_init__(self) -> None:
        if not (self.length > 0 and self.width > 0):
            raise ValueError("pitch dimensions must be positive")

    @property
    def center(self) -> Position:
        return Position(self.length / 2.0, self.width / 2.0)


class StateVector:
    """One world snapshot: the ball, 22 player positions and the possession fields.

    Coordinates live in a read-only float64 array of length 46 laid out as
    ``ball x, ball y, home 1..11 (x, y), guest 1..11 (x, y)``. Equality and
    hashing are bit-exact over that layout, so ``-0.0`` and ``0.0`` differ.
    """

    __slots__ = ("coords", "possessing_team", "possessing_player", "_key")

    def __init__(self, coords, possessing_team: Team | int = Team.HOME, possessing_player: int = 1):
        arr = np.array(coords, dtype=np.float64).reshape(-1)
        if arr.shape != (N_COORDS,):
            raise ValueError(f"state vector needs {N_COORDS} coordinates, got {arr.size}")
        arr.flags.writeable = False
        self.coords = arr
        # out-of-range possession values are kept so validate_state_vector can report them
        try:
            self.possessing_team = Team(possessing_team)
        except ValueError:
            self.possessing_team = possessing_team
        self.possessing_player = int(possessing_player)
        self._key = None

    @classmethod
    def from_positions(
        cls,
        ball: Position | tuple[float, float],
        home: Iterable[Position | tuple[float, float]],
        guest: Iterable[Position | tuple[float, float]],
        possessing_team: Team | int = Team.HOME,
        possessing_player: int = 1,
    ) -> "StateVector":
        pts = [tuple(ball)] if not isinstance(ball, Position) else [(ball.x, ball.y)]
        for group in (home, guest):
            group = list(group)
            if len(group) != N_SHIRTS:
                raise ValueError(f"each team needs {N_SHIRTS} positions")
            pts.extend((p.x, p.y) if isinstance(p, Position) else tuple(p) for p in group)
        return cls(np.asarray(pts, dtype=np.float64).reshape(-1), possessing_team, possessing_player)

    @classmethod
    def zeros(cls) -> "StateVector":
        return cls(np.zeros(N_COORDS))

    @property
    def ball(self) -> Position:
        return Position(float(self.coords[0]), float(self.coords[1]))

    @property
    def home_players(self) -> tuple[Position, ...]:
        return self._team_positions(Team.HOME)

    @property
    def guest_players(self) -> tuple[Position, ...]:
        return self._team_positions(Team.GUEST)

    def _team_positions(self, team: Team) -> tuple[Position, ...]:
        block = self.team_xy(team)
        return tuple(Position(float(x), float(y)) for x, y in block)

    def team_xy(self, team: Team) -> np.ndarray:
        """(11, 2) view of one team's positions, shirt 1 first."""
        start = 2 + 2 * N_SHIRTS * int(team)
        return self.coords[start:start + 2 * N_SHIRTS].reshape(N_SHIRTS, 2)

    def players_xy(self) -> np.ndarray:
        """(22, 2) view: home shirts 1..11 then guest shirts 1..11."""
        return self.coords[2:].reshape(2 * N_SHIRTS, 2)

    def player(self, team: Team, shirt: int) -> Position:
        x, y = self.team_xy(team)[shirt - 1]
        return Position(float(x), float(y))

    def with_ball(self, ball: Position | tuple[float, float]) -> "StateVector":
        arr = self.coords.copy()
        arr[0], arr[1] = (ball.x, ball.y) if isinstance(ball, Position) else ball
        return StateVector(arr, self.possessing_team, self.possessing_player)

    def key(self) -> bytes:
        if self._key is None:
            team = int(self.possessing_team) if isinstance(self.possessing_team, int) else -1
            self._key = self.coords.tobytes() + bytes([team & 0xFF, self.possessing_player & 0xFF])
        return self._key

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StateVector):
            return NotImplemented
        return (
            self.possessing_team == other.possessing_team
            and self.possessing_player == other.possessing_player
            and self.coords.tobytes() == other.coords.tobytes()
        )

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        b = self.ball
        team = self.possessing_team.name if isinstance(self.possessing_team, Team) else self.possessing_team
        return f"StateVector(ball=({b.x:.3f}, {b.y:.3f}), possession={team}#{self.possessing_player})"


def distance(a: StateVector, b: StateVector) -> float:
    """Euclidean distance over the 46 continuous coordinates; possession is ignored."""
    return float(distances_to(a.coords[None, :], b)[0])


def distances_to(coords: np.ndarray, ref: StateVector) -> np.ndarray:
    """Row-wise distance of an (n, 46) coordinate matrix to ``ref``."""
    diff = coords - ref.coords
    out = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    # squares of tiny or huge differences under/overflow; rescale those rows
    bad = (np.isinf(out) | ((out == 0.0) & diff.any(axis=1))) & np.isfinite(diff).all(axis=1)
    if bad.any():
        d = diff[bad]
        m = np.abs(d).max(axis=1)
        out[bad] = m * np.sqrt(np.einsum("ij,ij->i", d / m[:, None], d / m[:, None]))
    return out


# ---------------------------------------------------------------------------
# roster and will
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlayerEntry:
    team: Team
    shirt: int


class RosterError(ValueError):
    """Raised for roster and registration violations; ``code`` is machine readable."""

    def __init__(self, code: str, message: str = ""):
        super().__init__(f"{code}: {message}" if message else code)
        self.code = code


@dataclass(frozen=True)
class Roster:
    players: Mapping[AgentId, PlayerEntry] = field(default_factory=dict)
    supporters: Mapping[AgentId, Team] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.players) > MAX_PLAYERS:
            raise RosterError("RosterFull", f"at most {MAX_PLAYERS} players")
        seen: set[tuple[Team, int]] = set()
        for entry in self.players.values():
            if not 1 <= entry.shirt <= N_SHIRTS:
                raise RosterError("BadShirt", f"shirt {entry.shirt} outside 1..{N_SHIRTS}")
            slot = (entry.team, entry.shirt)
            if slot in seen:
                raise RosterError("DuplicateShirt", f"{entry.team.name} #{entry.shirt} taken")
            seen.add(slot)
        overlap = set(self.players) & set(self.supporters)
        if overlap:
            raise RosterError("DuplicateAgent", f"agents {sorted(overlap)} hold two roles")

    def role_of(self, agent: AgentId) -> Role:
        if agent in self.players:
            return Role.PLAYER
        if agent in self.supporters:
            return Role.SUPPORTER
        raise KeyError(agent)

    def __contains__(self, agent: object) -> bool:
        return agent in self.players or agent in self.supporters

    def __len__(self) -> int:
        return len(self.players) + len(self.supporters)

    def agent_ids(self) -> list[AgentId]:
        return sorted([*self.players, *self.supporters])

    def with_player(self, agent: AgentId, team: Team, shirt: int) -> "Roster":
        players = dict(self.players)
        players[agent] = PlayerEntry(Team(team), int(shirt))
        return replace(self, players=players)

    def with_supporter(self, agent: AgentId, favored: Team) -> "Roster":
        supporters = dict(self.supporters)
        supporters[agent] = Team(favored)
        return replace(self, supporters=supporters)

    def free_shirts(self, team: Team) -> list[int]:
        taken = {e.shirt for e in self.players.values() if e.team == team}
        return [s for s in range(1, N_SHIRTS + 1) if s not in taken]


class WillConstraintError(ValueError):
    pass


class WillTable(Mapping[AgentId, float]):
    """Immutable power-of-will assignment.

    Players must sum to the player count and supporters to at most one, both
    within ``SUM_TOL``. Backed by parallel arrays sorted by agent id.
    """

    __slots__ = ("ids", "values", "is_player", "_index", "player_sum", "supporter_sum")

    def __init__(self, will: Mapping[AgentId, float], players: Iterable[AgentId]):
        player_set = set(players)
        ids = np.array(sorted(will), dtype=np.int64)
        values = np.array([float(will[a]) for a in ids.tolist()], dtype=np.float64)
        is_player = np.array([a in player_set for a in ids.tolist()], dtype=bool)
        missing = player_set - set(will)
        if missing:
            raise WillConstraintError(f"players without will: {sorted(missing)}")
        self._init_arrays(ids, values, is_player)

    @classmethod
    def from_arrays(cls, ids: np.ndarray, values: np.ndarray, is_player: np.ndarray) -> "WillTable":
        obj = cls.__new__(cls)
        order = np.argsort(ids, kind="stable")
        obj._init_arrays(np.asarray(ids, dtype=np.int64)[order],
                         np.asarray(values, dtype=np.float64)[order],
                         np.asarray(is_player, dtype=bool)[order])
        return obj

    @classmethod
    def empty(cls) -> "WillTable":
        return cls({}, ())

    def _init_arrays(self, ids: np.ndarray, values: np.ndarray, is_player: np.ndarray) -> None:
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise WillConstraintError("will values must be finite and non-negative")
        if len(np.unique(ids)) != len(ids):
            raise WillConstraintError("duplicate agent ids")
        player_sum = math.fsum(values[is_player].tolist())
        supporter_sum = math.fsum(values[~is_player].tolist())
        n_players = int(is_player.sum())
        if abs(player_sum - n_players) > SUM_TOL:
            raise WillConstraintError(f"player will sums to {player_sum!r}, expected {n_players}")
        if supporter_sum > 1.0 + SUM_TOL:
            raise WillConstraintError(f"supporter will sums to {supporter_sum!r} > 1")
        for arr in (ids, values, is_player):
            arr.flags.writeable = False
        self.ids = ids
        self.values = values
        self.is_player = is_player
        self._index = {a: i for i, a in enumerate(ids.tolist())}
        self.player_sum = player_sum
        self.supporter_sum = supporter_sum

    def __getitem__(self, agent: AgentId) -> float:
        return float(self.values[self._index[agent]])

    def __iter__(self) -> Iterator[AgentId]:
        return iter(self.ids.tolist())

    def __len__(self) -> int:
        return len(self.ids)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WillTable):
            return NotImplemented
        return (
            self.ids.tobytes() == other.ids.tobytes()
            and self.values.tobytes() == other.values.tobytes()
            and self.is_player.tobytes() == other.is_player.tobytes()
        )

    __hash__ = None  # type: ignore[assignment]

    def index_of(self, agents: np.ndarray) -> np.ndarray:
        """Positions of ``agents`` in the backing arrays (all must be present)."""
        pos = np.searchsorted(self.ids, agents)
        if len(agents) and (np.any(pos >= len(self.ids)) or np.any(self.ids[np.minimum(pos, len(self.ids) - 1)] != agents)):
            raise KeyError("agent not in will table")
        return pos

    def role_of(self, agent: AgentId) -> Role:
        return Role.PLAYER if self.is_player[self._index[agent]] else Role.SUPPORTER

    def players(self) -> list[AgentId]:
        return self.ids[self.is_player].tolist()

    def supporters(self) -> list[AgentId]:
        return self.ids[~self.is_player].tolist()

    def with_agent(self, agent: AgentId, role: Role, w: float) -> "WillTable":
        if agent in self._index:
            raise WillConstraintError(f"agent {agent} already present")
        return WillTable.from_arrays(
            np.append(self.ids, agent), np.append(self.values, float(w)), np.append(self.is_player, role == Role.PLAYER)
        )

    def __repr__(self) -> str:
        return f"WillTable(players={int(self.is_player.sum())}, supporters={int((~self.is_player).sum())})"


# ---------------------------------------------------------------------------
# match configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MatchConfig:
    roster: Roster = field(default_factory=Roster)
    starting_lineup: Optional[StateVector] = None
    initial_will: Optional[WillTable] = None
    tick_period_ms: int = 100
    proposal_deadline_ms: int = 80
    match_ticks: int = 6000
    rng_seed: int = 0
    pitch: Pitch = field(default_factory=Pitch)
    bounds_check: BoundsCheck = BoundsCheck.OFF
    will_update_rate: float = 0.1
    # supporter budget per favoured team and expected registrations per team
    supporter_budget: Mapping[Team, float] = field(default_factory=lambda: {Team.HOME: 0.5, Team.GUEST: 0.5})
    expected_supporters: Mapping[Team, int] = field(default_factory=lambda: {Team.HOME: 1, Team.GUEST: 1})

    def __post_init__(self) -> None:
        if not 0 < self.proposal_deadline_ms < self.tick_period_ms:
            raise ValueError("need 0 < proposal_deadline_ms < tick_period_ms")
        if self.match_ticks < 1:
            raise ValueError("match_ticks must be >= 1")
        if not 0.0 <= self.will_update_rate <= 1.0:
            raise ValueError("will_update_rate must lie in [0, 1]")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be an unsigned 64-bit integer")
        budget = {Team(k): float(v) for k, v in self.supporter_budget.items()}
        if any(v < 0 for v in budget.values()) or math.fsum(budget.values()) > 1.0 + SUM_TOL:
            raise ValueError("supporter budgets must be non-negative and sum to at most 1")
        if any(int(v) < 0 for v in self.expected_supporters.values()):
            raise ValueError("expected supporter counts must be non-negative")


# ---------------------------------------------------------------------------
# validation and kickoff
# ---------------------------------------------------------------------------

def validate_state_vector(
    s: StateVector,
    cfg: Optional[MatchConfig] = None,
    *,
    pitch: Optional[Pitch] = None,
    bounds_check: Optional[BoundsCheck] = None,
) -> Optional[InvalidReason]:
    """Return ``None`` when ``s`` is valid, otherwise the reason it is not.

    Pitch and bounds mode come from ``cfg`` unless given explicitly. Never
    clamps or otherwise touches ``s``.
    """
    if pitch is None:
        pitch = cfg.pitch if cfg is not None else Pitch()
    if bounds_check is None:
        bounds_check = cfg.bounds_check if cfg is not None else BoundsCheck.OFF
    if not np.all(np.isfinite(s.coords)):
        return InvalidReason.NON_FINITE
    if not isinstance(s.possessing_team, Team) or not 1 <= s.possessing_player <= N_SHIRTS:
        return InvalidReason.BAD_POSSESSION
    if bounds_check is BoundsCheck.REJECT and not _within(s.coords, pitch):
        return InvalidReason.OUT_OF_BOUNDS
    return None


def _within(coords: np.ndarray, pitch: Pitch) -> bool:
    xs, ys = coords[0::2], coords[1::2]
    m = BOUNDS_MARGIN
    return bool(
        xs.min() >= -m and xs.max() <= pitch.length + m and ys.min() >= -m and ys.max() <= pitch.width + m
    )


def invalid_rows(coords: np.ndarray, pitch: Pitch, bounds_check: BoundsCheck) -> np.ndarray:
    """Vectorised coordinate checks for an (n, 46) matrix; True marks an invalid row."""
    bad = ~np.isfinite(coords).all(axis=1)
    if bounds_check is BoundsCheck.REJECT:
        m = BOUNDS_MARGIN
        with np.errstate(invalid="ignore"):
            xs, ys = coords[:, 0::2], coords[:, 1::2]
            out = (xs < -m).any(1) | (xs > pitch.length + m).any(1) | (ys < -m).any(1) | (ys > pitch.width + m).any(1)
        bad |= out
    return bad


# 4-4-2 for the home side as fractions of (length, width); guests are mirrored in x
_KICKOFF_442 = (
    (0.05, 0.50),
    (0.20, 0.15), (0.20, 0.38), (0.20, 0.62), (0.20, 0.85),
    (0.35, 0.15), (0.35, 0.38), (0.35, 0.62), (0.35, 0.85),
    (0.45, 0.35), (0.45, 0.65),
)


def formation_positions(pitch: Pitch, team: Team) -> np.ndarray:
    """(11, 2) kickoff formation for ``team``; index i is shirt i + 1."""
    frac = np.array(_KICKOFF_442, dtype=np.float64)
    pos = frac * np.array([pitch.length, pitch.width])
    if team is Team.GUEST:
        pos[:, 0] = pitch.length - pos[:, 0]
    return pos


def make_kickoff_lineup(pitch: Pitch | MatchConfig = Pitch()) -> StateVector:
    if isinstance(pitch, MatchConfig):
        pitch = pitch.pitch
    center = np.array([pitch.length / 2.0, pitch.width / 2.0])
    home = formation_positions(pitch, Team.HOME)
    guest = formation_positions(pitch, Team.GUEST)
    d = np.hypot(*(home - center).T)
    # argmin returns the first minimum, i.e. the lowest shirt on ties
    shirt = int(np.argmin(d)) + 1
    coords = np.concatenate([center, home.reshape(-1), guest.reshape(-1)])
    return StateVector(coords, Team.HOME, shirt)
