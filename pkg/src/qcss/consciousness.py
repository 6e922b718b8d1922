"""Soccer consciousness scoring, proposal selection and the will-power update."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import AbstractSet, Iterable, Optional, Sequence, Union

import numpy as np

from .model import AgentId, Role, Roster, StateVector, WillTable, distances_to


class Fallback(enum.Enum):
    NONE = "none"
    REPEAT_REALITY = "repeat_reality"


REPEAT_REALITY = Fallback.REPEAT_REALITY
Winner = Union[AgentId, Fallback]

DEFAULT_WILL_UPDATE_RATE = 0.1


class MissingProposalError(ValueError):
    """An agent was scored without a previous proposal to compare against."""


@dataclass(frozen=True)
class ProposalRecord:
    agent: AgentId
    role: Role
    sent: StateVector
    prev_sent: Optional[StateVector] = None


@dataclass(frozen=True)
class ScoredProposal:
    agent: AgentId
    sc_value: float
    eligible: bool = True


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------

def score_kernel(is_player: np.ndarray, will: np.ndarray, dist: np.ndarray) -> np.ndarray:
    """Consciousness values for aligned arrays of role flags, will and distances.

    ``w/d`` where ``d > 0``; perfect predictors take the best score in their
    role, or their own will when nobody in the role missed.
    """
    will = np.asarray(will, dtype=np.float64)
    dist = np.asarray(dist, dtype=np.float64)
    sc = np.empty_like(will)
    for mask in (is_player, ~is_player):
        if not mask.any():
            continue
        d = dist[mask]
        w = will[mask]
        hit = d > 0
        group = np.empty_like(w)
        if hit.any():
            with np.errstate(over="ignore"):
                group[hit] = w[hit] / d[hit]
            group[~hit] = group[hit].max()
        else:
            group[:] = w
        sc[mask] = group
    return sc


def soccer_consciousness(
    agents: Sequence[tuple[AgentId, Role, float, Optional[StateVector]]], reality: StateVector
) -> list[tuple[AgentId, float]]:
    """Score each ``(agent, role, will, prev_sent)`` against the realised state.

    The max branch only looks at agents passed in the same call, grouped by
    role, so callers restrict ``agents`` to the eligible set first.
    """
    if not agents:
        return []
    prev = []
    for agent, _, _, sent in agents:
        if sent is None:
            raise MissingProposalError(f"agent {agent} has no previous proposal")
        prev.append(sent.coords)
    will = np.array([a[2] for a in agents], dtype=np.float64)
    if np.any(will < 0):
        raise ValueError("will values must be non-negative")
    is_player = np.array([Role(a[1]) is Role.PLAYER for a in agents])
    dist = distances_to(np.vstack(prev), reality)
    sc = score_kernel(is_player, will, dist)
    return [(a[0], float(v)) for a, v in zip(agents, sc)]


# ---------------------------------------------------------------------------
# distributions
# ---------------------------------------------------------------------------

class SelectionDistribution:
    """Probabilities over agents, sorted by ascending agent id.

    An empty distribution always carries ``Fallback.REPEAT_REALITY``.
    """

    __slots__ = ("agents", "probabilities", "fallback", "_cdf")

    def __init__(self, agents: Iterable[AgentId] = (), probabilities: Iterable[float] = ()):
        ids = np.asarray(list(agents) if not isinstance(agents, np.ndarray) else agents, dtype=np.int64)
        probs = np.asarray(
            list(probabilities) if not isinstance(probabilities, np.ndarray) else probabilities, dtype=np.float64
        )
        if ids.shape != probs.shape:
            raise ValueError("agents and probabilities differ in length")
        if len(ids) > 1 and np.any(np.diff(ids) <= 0):
            order = np.argsort(ids, kind="stable")
            ids, probs = ids[order], probs[order]
            if np.any(np.diff(ids) == 0):
                raise ValueError("duplicate agent in distribution")
        for arr in (ids, probs):
            arr.flags.writeable = False
        self.agents = ids
        self.probabilities = probs
        self.fallback = Fallback.NONE if len(ids) else Fallback.REPEAT_REALITY
        self._cdf: Optional[np.ndarray] = None

    @classmethod
    def empty(cls) -> "SelectionDistribution":
        return cls()

    @property
    def entries(self) -> list[tuple[AgentId, float]]:
        return list(zip(self.agents.tolist(), self.probabilities.tolist()))

    def probability(self, agent: AgentId) -> float:
        pos = np.searchsorted(self.agents, agent)
        if pos < len(self.agents) and self.agents[pos] == agent:
            return float(self.probabilities[pos])
        return 0.0

    def support(self) -> set[AgentId]:
        return set(self.agents[self.probabilities > 0].tolist())

    def cdf(self) -> np.ndarray:
        if self._cdf is None:
            self._cdf = np.cumsum(self.probabilities)
        return self._cdf

    def __len__(self) -> int:
        return len(self.agents)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SelectionDistribution):
            return NotImplemented
        return (
            self.agents.tobytes() == other.agents.tobytes()
            and self.probabilities.tobytes() == other.probabilities.tobytes()
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        if not len(self):
            return "SelectionDistribution(<empty>, fallback=REPEAT_REALITY)"
        head = ", ".join(f"{a}: {p:.4g}" for a, p in self.entries[:6])
        more = ", ..." if len(self) > 6 else ""
        return f"SelectionDistribution({{{head}{more}}})"


def distribution_from_arrays(agents: np.ndarray, sc: np.ndarray, eligible: np.ndarray) -> SelectionDistribution:
    """Normalise ``sc`` over the eligible entries; ineligible entries get exactly 0."""
    sc = np.asarray(sc, dtype=np.float64)
    if np.any(sc < 0) or np.any(np.isnan(sc)):
        raise ValueError("sc values must be non-negative")
    eligible = np.asarray(eligible, dtype=bool)
    live = sc[eligible]
    if live.size == 0:
        return SelectionDistribution.empty()
    probs = np.zeros_like(sc)
    if np.isinf(live).any():
        # w/d overflowed for a near-perfect predictor: those share the mass equally
        inf = np.isinf(live)
        probs[eligible] = np.where(inf, 1.0 / inf.sum(), 0.0)
        return SelectionDistribution(np.asarray(agents, dtype=np.int64), probs)
    total = math.fsum(live.tolist())
    if not total > 0:
        return SelectionDistribution.empty()
    probs[eligible] = live / total
    return SelectionDistribution(np.asarray(agents, dtype=np.int64), probs)


def selection_distribution(scored: Sequence[ScoredProposal]) -> SelectionDistribution:
    agents = np.array([s.agent for s in scored], dtype=np.int64)
    sc = np.array([s.sc_value for s in scored], dtype=np.float64)
    eligible = np.array([s.eligible for s in scored], dtype=bool)
    if np.any(sc < 0):
        raise ValueError("sc values must be non-negative")
    return distribution_from_arrays(agents, np.where(eligible, sc, 0.0), eligible)


def late_filtered_distribution(
    all_agents: Roster,
    on_time_now: AbstractSet[AgentId],
    on_time_prev: AbstractSet[AgentId],
    scored: Sequence[ScoredProposal],
) -> SelectionDistribution:
    """Selection restricted to agents on time at both the previous and current tick.

    Agents on time now but late before stay in the distribution with
    probability 0 and are left out of the normaliser.
    """
    eligible = set(on_time_now) & set(on_time_prev)
    by_agent = {s.agent: s for s in scored}
    if set(by_agent) - eligible:
        raise ValueError(f"scored agents outside the eligible set: {sorted(set(by_agent) - eligible)}")
    unknown = set(on_time_now) - set(all_agents.agent_ids())
    if unknown:
        raise ValueError(f"agents not in roster: {sorted(unknown)}")
    rows = []
    for agent in sorted(on_time_now):
        s = by_agent.get(agent)
        if agent in eligible and s is None:
            raise MissingProposalError(f"eligible agent {agent} was not scored")
        rows.append(ScoredProposal(agent, s.sc_value if s else 0.0, agent in eligible))
    return selection_distribution(rows)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def sample(dist: SelectionDistribution, rng: np.random.Generator) -> Winner:
    """Inverse-CDF draw over the id-sorted entries using exactly one uniform."""
    if not len(dist):
        return REPEAT_REALITY
    u = rng.random()
    cdf = dist.cdf()
    idx = int(np.searchsorted(cdf, u, side="right"))
    if idx >= len(cdf):
        # u landed beyond a cdf that rounds to slightly under 1
        idx = int(np.flatnonzero(dist.probabilities > 0)[-1])
    return int(dist.agents[idx])


# ---------------------------------------------------------------------------
# will update
# ---------------------------------------------------------------------------

def update_will_arrays(current: WillTable, sc: np.ndarray, alpha: float) -> WillTable:
    """``sc`` is aligned with ``current.ids``; absent agents carry 0."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 0.0:
        return current
    sc = np.asarray(sc, dtype=np.float64)
    new = current.values.copy()
    for mask in (current.is_player, ~current.is_player):
        if not mask.any():
            continue
        w = current.values[mask]
        s = sc[mask]
        w_sum = math.fsum(w.tolist())
        s_sum = math.fsum(s.tolist())
        if not s_sum > 0:
            continue
        raw = (1.0 - alpha) * w + alpha * s * (w_sum / s_sum)
        raw_sum = math.fsum(raw.tolist())
        if raw_sum > 0 and raw_sum != w_sum:
            raw = raw * (w_sum / raw_sum)
        new[mask] = raw
    return WillTable.from_arrays(current.ids, new, current.is_player)


def update_will(current: WillTable, scored: Sequence[ScoredProposal], alpha: float = DEFAULT_WILL_UPDATE_RATE) -> WillTable:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    sc = np.zeros(len(current))
    if scored:
        agents = np.array([s.agent for s in scored], dtype=np.int64)
        sc[current.index_of(agents)] = [s.sc_value for s in scored]
    return update_will_arrays(current, sc, alpha)
