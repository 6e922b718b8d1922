"""Reference player and supporter behaviours.

A reference player predicts one tick of play for its own side and leaves the
opponents where they are. Within its proposal:

* a teammate controlling the ball (within ``control_radius``) passes toward
  the most advanced open teammate ahead of him, or dribbles toward the
  opponent goal with the ball ``dribble_lead`` metres in front;
* otherwise the teammate nearest to the ball runs at it;
* every other teammate drifts toward its formation anchor, which is its
  kickoff spot shifted by a per-archetype share of the ball's offset from the
  centre spot.

Players never move more than ``max_speed`` per tick, and possession passes to
the nearest player within ``control_radius`` of the ball.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..model import N_SHIRTS, Pitch, Position, StateVector, Team, formation_positions
from .sdk import AgentBehavior, Identity


class ArchetypeKind(enum.Enum):
    ATTACKER = "attacker"
    MIDFIELDER = "midfielder"
    DEFENDER = "defender"


PULL_FACTOR = {ArchetypeKind.ATTACKER: 0.4, ArchetypeKind.MIDFIELDER: 0.25, ArchetypeKind.DEFENDER: 0.1}
DEFAULT_MAX_SPEED = 0.8


@dataclass(frozen=True)
class PlayerArchetype:
    kind: ArchetypeKind
    home_position: Position
    max_speed: float = DEFAULT_MAX_SPEED

    def __post_init__(self) -> None:
        if not self.max_speed > 0:
            raise ValueError("max_speed must be positive")


def archetype_kind_for_shirt(shirt: int) -> ArchetypeKind:
    # 4-4-2: keeper and back four defend, 6..9 midfield, 10..11 up front
    if shirt <= 5:
        return ArchetypeKind.DEFENDER
    if shirt <= 9:
        return ArchetypeKind.MIDFIELDER
    return ArchetypeKind.ATTACKER


def default_archetype(team: Team, shirt: int, pitch: Pitch = Pitch(), max_speed: float = DEFAULT_MAX_SPEED) -> PlayerArchetype:
    x, y = formation_positions(pitch, team)[shirt - 1]
    return PlayerArchetype(archetype_kind_for_shirt(shirt), Position(float(x), float(y)), max_speed)


@dataclass
class _Plan:
    coords: np.ndarray
    team: Team
    player: int
    steps: int = 0
    proposal: Optional[StateVector] = None


# teammates sharing parameters predict identical steps; memoised across instances
_STEP_CACHE: dict[bytes, "_Plan"] = {}
_STEP_CACHE_LIMIT = 4096


class ReferencePlayer(AgentBehavior):
    def __init__(
        self,
        archetype: PlayerArchetype,
        team: Team,
        shirt: int,
        pitch: Pitch = Pitch(),
        *,
        control_radius: float = 1.0,
        dribble_lead: float = 0.5,
        pass_speed: float = 3.0,
        pass_range: float = 20.0,
        open_radius: float = 3.0,
        min_progress: float = 2.0,
        horizon: int = 1,
    ):
        self.team = Team(team)
        self.shirt = int(shirt)
        self.pitch = pitch
        self.control_radius = control_radius
        self.dribble_lead = dribble_lead
        self.pass_speed = pass_speed
        self.pass_range = pass_range
        self.open_radius = open_radius
        self.min_progress = min_progress
        self.horizon = horizon
        homes = formation_positions(pitch, self.team)
        kinds = [archetype_kind_for_shirt(s) for s in range(1, N_SHIRTS + 1)]
        speeds = np.full(N_SHIRTS, DEFAULT_MAX_SPEED)
        homes[self.shirt - 1] = (archetype.home_position.x, archetype.home_position.y)
        kinds[self.shirt - 1] = archetype.kind
        speeds[self.shirt - 1] = archetype.max_speed
        self.homes = homes
        self.pull = np.array([PULL_FACTOR[k] for k in kinds])[:, None]
        self.speeds = speeds
        self.center = np.array([pitch.length / 2.0, pitch.width / 2.0])
        self.goal = np.array([pitch.length if self.team is Team.HOME else 0.0, pitch.width / 2.0])
        self.attack_sign = 1.0 if self.team is Team.HOME else -1.0
        self._lo = np.zeros(2)
        self._hi = np.array([pitch.length, pitch.width])
        params = (control_radius, dribble_lead, pass_speed, pass_range, open_radius, min_progress)
        self._param_key = (
            bytes([int(self.team)]) + homes.tobytes() + self.pull.tobytes() + speeds.tobytes() + np.array(params).tobytes()
        )

    def observe(self, reality: StateVector, me: Identity) -> _Plan:
        return _Plan(reality.coords.copy(), reality.possessing_team, reality.possessing_player)

    def done(self, plan: _Plan) -> bool:
        return plan.steps >= self.horizon

    def propose(self, plan: _Plan) -> StateVector:
        if plan.proposal is None:
            plan.proposal = StateVector(plan.coords, plan.team, plan.player)
        return plan.proposal

    def step(self, plan: _Plan) -> _Plan:
        key = self._param_key + plan.coords.tobytes() + bytes([int(plan.team), plan.player & 0xFF, plan.steps & 0xFF])
        hit = _STEP_CACHE.get(key)
        if hit is None:
            if len(_STEP_CACHE) >= _STEP_CACHE_LIMIT:
                _STEP_CACHE.clear()
            hit = _STEP_CACHE[key] = self._step(plan)
        return hit

    def _step(self, plan: _Plan) -> _Plan:
        coords = plan.coords.copy()
        ball = coords[0:2].copy()
        players = coords[2:].reshape(2 * N_SHIRTS, 2)
        own_slice = slice(0, N_SHIRTS) if self.team is Team.HOME else slice(N_SHIRTS, 2 * N_SHIRTS)
        opp_slice = slice(N_SHIRTS, 2 * N_SHIRTS) if self.team is Team.HOME else slice(0, N_SHIRTS)
        own = players[own_slice].copy()
        opp = players[opp_slice]

        carrier: Optional[int] = None
        if plan.team == self.team:
            c = plan.player - 1
            if np.hypot(*(own[c] - ball)) <= self.control_radius:
                carrier = c

        targets = np.clip(self.homes + self.pull * (ball - self.center), self._lo, self._hi)
        if carrier is None:
            # argmin keeps the lowest shirt on ties
            chaser = int(np.argmin(np.hypot(*(own - ball).T)))
            targets[chaser] = ball

        new_own = _advance(own, targets, self.speeds)
        if carrier is not None:
            receiver = self._open_teammate(own, opp, carrier)
            if receiver is not None:
                new_own[carrier] = own[carrier]
                ball = _advance(ball[None, :], own[receiver][None, :], np.array([self.pass_speed]))[0]
            else:
                new_own[carrier] = _advance(own[carrier][None, :], self.goal[None, :], self.speeds[carrier:carrier + 1])[0]
                heading = self.goal - new_own[carrier]
                norm = np.hypot(*heading)
                lead = heading / norm * self.dribble_lead if norm > 0 else np.zeros(2)
                ball = new_own[carrier] + lead
        new_own = np.clip(new_own, self._lo, self._hi)
        ball = np.clip(ball, self._lo, self._hi)

        players[own_slice] = new_own
        coords[0:2] = ball
        team, player = possession_after(players, ball, plan.team, plan.player, self.control_radius)
        return _Plan(coords, team, player, plan.steps + 1)

    def _open_teammate(self, own: np.ndarray, opp: np.ndarray, carrier: int) -> Optional[int]:
        progress = self.attack_sign * (own[:, 0] - own[carrier, 0])
        reach = np.hypot(*(own - own[carrier]).T)
        gaps = np.hypot(own[:, None, 0] - opp[None, :, 0], own[:, None, 1] - opp[None, :, 1]).min(axis=1)
        ok = (progress >= self.min_progress) & (reach <= self.pass_range) & (gaps > self.open_radius)
        ok[carrier] = False
        if not ok.any():
            return None
        # most advanced candidate, lowest shirt on ties
        best = np.where(ok, progress, -np.inf)
        return int(np.argmax(best))


def _advance(pos: np.ndarray, target: np.ndarray, speed: np.ndarray) -> np.ndarray:
    delta = target - pos
    dist = np.hypot(delta[:, 0], delta[:, 1])
    scale = np.ones_like(dist)
    far = dist > speed
    scale[far] = speed[far] / dist[far]
    return pos + delta * scale[:, None]


def possession_after(players: np.ndarray, ball: np.ndarray, team: Team, player: int, radius: float = 1.0) -> tuple[Team, int]:
    """Nearest player within ``radius`` of the ball takes possession.

    The current possessor keeps the ball while no one is strictly nearer;
    other ties go to the lower shirt number, then Home before Guest. Without
    a player in range possession is unchanged.
    """
    d = np.hypot(players[:, 0] - ball[0], players[:, 1] - ball[1])
    close = np.flatnonzero(d <= radius)
    if close.size == 0:
        return team, player
    holder = int(team) * N_SHIRTS + player - 1
    if 0 <= holder < d.size and d[holder] <= radius and d[holder] == d[close].min():
        # chasers land exactly on the ball, so ties are common; a fixed
        # team order would hand every such challenge to one side
        return Team(team), player
    # index i: team i // 11, shirt i % 11 + 1
    best = min(close.tolist(), key=lambda i: (d[i], i % N_SHIRTS, i // N_SHIRTS))
    return Team(best // N_SHIRTS), best % N_SHIRTS + 1


def reference_player(archetype: PlayerArchetype, identity: Identity, pitch: Pitch = Pitch(), **kwargs) -> ReferencePlayer:
    if identity.shirt is None:
        raise ValueError("reference players need a shirt number")
    return ReferencePlayer(archetype, identity.team, identity.shirt, pitch, **kwargs)


class ReferenceSupporter(AgentBehavior):
    """Shows the reality back with the ball nudged ``bias`` metres toward the opponent goal line."""

    def __init__(self, favored_team: Team, bias: float = 1.0, pitch: Pitch = Pitch()):
        if bias < 0:
            raise ValueError("bias must be non-negative")
        self.favored_team = Team(favored_team)
        self.bias = float(bias)
        self.pitch = pitch
        self._cache: tuple[Optional[bytes], Optional[StateVector]] = (None, None)

    def observe(self, reality: StateVector, me: Identity) -> StateVector:
        if self.bias == 0:
            return reality
        key = reality.key()
        if self._cache[0] == key:
            return self._cache[1]
        step = self.bias if self.favored_team is Team.HOME else -self.bias
        x = min(max(reality.coords[0] + step, 0.0), self.pitch.length)
        proposal = reality.with_ball((x, float(reality.coords[1])))
        self._cache = (key, proposal)
        return proposal

    def propose(self, state: StateVector) -> StateVector:
        return state


def reference_supporter(favored_team: Team, bias: float = 1.0, pitch: Pitch = Pitch()) -> ReferenceSupporter:
    return ReferenceSupporter(favored_team, bias, pitch)
