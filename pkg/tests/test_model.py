from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import random_state, states
from qcss.model import (
    BoundsCheck,
    InvalidReason,
    MatchConfig,
    Pitch,
    Position,
    Role,
    Roster,
    RosterError,
    StateVector,
    Team,
    WillConstraintError,
    WillTable,
    distance,
    make_kickoff_lineup,
    validate_state_vector,
)


def _loop_distance(a: StateVector, b: StateVector) -> float:
    # coordinate-by-coordinate accumulation, no numpy arithmetic
    total = 0.0
    for x, y in zip(a.coords.tolist(), b.coords.tolist()):
        total += (x - y) * (x - y)
    return math.sqrt(total)


class TestDistance:
    def test_identical_vectors(self):
        s = make_kickoff_lineup()
        assert distance(s, s) == 0.0

    def test_three_four_five(self):
        a = StateVector.zeros()
        b = a.with_ball((3.0, 4.0))
        assert distance(a, b) == 5.0

    def test_possession_is_ignored(self):
        a = StateVector.zeros()
        b = StateVector(a.coords, Team.GUEST, 9)
        assert distance(a, b) == 0.0
        assert a != b

    def test_matches_loop_oracle(self, rng):
        for _ in range(100):
            a, b = random_state(rng), random_state(rng)
            expected = _loop_distance(a, b)
            assert distance(a, b) == pytest.approx(expected, rel=1e-12, abs=0.0)

    @given(states(), states(), states())
    @settings(max_examples=300)
    def test_metric_axioms(self, a, b, c):
        assert distance(a, a) == 0.0
        assert distance(a, b) == distance(b, a)
        assert distance(a, b) >= 0.0
        assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9

    def test_subnormal_difference_is_not_zero(self):
        a = StateVector.zeros()
        assert distance(a, a.with_ball((5e-324, 0.0))) == 5e-324

    def test_huge_difference_does_not_overflow(self):
        a = StateVector.zeros()
        assert distance(a, a.with_ball((3e300, 4e300))) == pytest.approx(5e300, rel=1e-15)

    @given(states(), states())
    def test_zero_iff_coordinates_equal(self, a, b):
        same = bool(np.array_equal(a.coords, b.coords))
        assert (distance(a, b) == 0.0) == same


class TestStateVector:
    def test_layout(self):
        home = [(i, 10.0 + i) for i in range(1, 12)]
        guest = [(100.0 - i, 20.0 + i) for i in range(1, 12)]
        s = StateVector.from_positions((1.5, 2.5), home, guest, Team.GUEST, 4)
        assert s.coords[:2].tolist() == [1.5, 2.5]
        assert s.coords[2:4].tolist() == [1.0, 11.0]
        assert s.coords[24:26].tolist() == [99.0, 21.0]
        assert s.player(Team.GUEST, 11) == Position(89.0, 31.0)
        assert s.ball == Position(1.5, 2.5)

    def test_read_only(self):
        s = StateVector.zeros()
        with pytest.raises(ValueError):
            s.coords[0] = 1.0

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            StateVector(np.zeros(45))

    def test_signed_zero_is_a_different_state(self):
        a = StateVector.zeros()
        b = a.with_ball((-0.0, 0.0))
        assert a != b
        assert distance(a, b) == 0.0


class TestValidate:
    def test_zeros_valid_with_bounds_off(self):
        assert validate_state_vector(StateVector.zeros(), bounds_check=BoundsCheck.OFF) is None

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_non_finite(self, bad):
        s = StateVector.zeros().with_ball((bad, 0.0))
        assert validate_state_vector(s) is InvalidReason.NON_FINITE

    def test_out_of_bounds_only_when_rejecting(self):
        s = StateVector.zeros().with_ball((-100.0, 0.0))
        pitch = Pitch(105.0, 68.0)
        assert validate_state_vector(s, pitch=pitch, bounds_check=BoundsCheck.REJECT) is InvalidReason.OUT_OF_BOUNDS
        assert validate_state_vector(s, pitch=pitch, bounds_check=BoundsCheck.OFF) is None

    def test_margin_is_five_metres(self):
        pitch = Pitch(105.0, 68.0)
        base = make_kickoff_lineup(pitch)
        inside = base.with_ball((-5.0, 73.0))
        outside = base.with_ball((110.0 + 1e-9, 34.0))
        assert validate_state_vector(inside, pitch=pitch, bounds_check=BoundsCheck.REJECT) is None
        assert validate_state_vector(outside, pitch=pitch, bounds_check=BoundsCheck.REJECT) is InvalidReason.OUT_OF_BOUNDS

    @pytest.mark.parametrize("team,player", [(Team.HOME, 0), (Team.HOME, 12), (2, 1), (-1, 5)])
    def test_bad_possession(self, team, player):
        s = StateVector(np.zeros(46), team, player)
        assert validate_state_vector(s) is InvalidReason.BAD_POSSESSION

    @given(states())
    def test_never_mutates(self, s):
        before = s.coords.tobytes(), s.possessing_team, s.possessing_player
        validate_state_vector(s, bounds_check=BoundsCheck.REJECT)
        assert (s.coords.tobytes(), s.possessing_team, s.possessing_player) == before


class TestKickoff:
    def test_ball_at_centre(self):
        s = make_kickoff_lineup(Pitch(105.0, 68.0))
        assert s.ball == Position(52.5, 34.0)

    def test_valid_under_reject(self):
        for pitch in (Pitch(105.0, 68.0), Pitch(90.0, 45.0), Pitch(120.0, 90.0)):
            s = make_kickoff_lineup(pitch)
            assert validate_state_vector(s, pitch=pitch, bounds_check=BoundsCheck.REJECT) is None

    def test_deterministic(self):
        assert make_kickoff_lineup(MatchConfig()) == make_kickoff_lineup(MatchConfig())

    def test_possession_nearest_home_shirt(self):
        pitch = Pitch(105.0, 68.0)
        s = make_kickoff_lineup(pitch)
        home = s.team_xy(Team.HOME)
        d = np.hypot(home[:, 0] - 52.5, home[:, 1] - 34.0)
        nearest = int(np.flatnonzero(d == d.min())[0]) + 1
        assert s.possessing_team is Team.HOME
        assert s.possessing_player == nearest

    def test_teams_mirrored(self):
        pitch = Pitch(105.0, 68.0)
        s = make_kickoff_lineup(pitch)
        home, guest = s.team_xy(Team.HOME), s.team_xy(Team.GUEST)
        np.testing.assert_allclose(guest[:, 0], pitch.length - home[:, 0], rtol=0, atol=1e-12)
        np.testing.assert_array_equal(guest[:, 1], home[:, 1])
        assert (home[:, 0] < pitch.length / 2).all()


class TestRoster:
    def test_duplicate_shirt(self):
        r = Roster().with_player(1, Team.HOME, 7)
        with pytest.raises(RosterError) as exc:
            r.with_player(2, Team.HOME, 7)
        assert exc.value.code == "DuplicateShirt"
        r.with_player(2, Team.GUEST, 7)

    def test_overlap_rejected(self):
        r = Roster().with_player(1, Team.HOME, 1)
        with pytest.raises(RosterError) as exc:
            r.with_supporter(1, Team.HOME)
        assert exc.value.code == "DuplicateAgent"

    def test_too_many_players(self):
        r = Roster()
        n = 0
        for team in Team:
            for shirt in range(1, 12):
                n += 1
                r = r.with_player(n, team, shirt)
        assert len(r.players) == 22
        assert r.free_shirts(Team.HOME) == []

    def test_bad_shirt(self):
        with pytest.raises(RosterError):
            Roster().with_player(1, Team.HOME, 12)


class TestWillTable:
    def test_valid_table(self):
        w = WillTable({1: 1.5, 2: 0.5, 3: 0.4, 4: 0.6}, players=[1, 2])
        assert w.player_sum == 2.0
        assert w.supporter_sum == 1.0
        assert w.role_of(3) is Role.SUPPORTER
        assert w.players() == [1, 2]

    def test_player_sum_must_match_count(self):
        with pytest.raises(WillConstraintError):
            WillTable({1: 1.0, 2: 0.9}, players=[1, 2])

    def test_player_sum_tolerance(self):
        WillTable({1: 1.0 + 5e-10, 2: 1.0}, players=[1, 2])
        with pytest.raises(WillConstraintError):
            WillTable({1: 1.0 + 5e-9, 2: 1.0}, players=[1, 2])

    def test_supporter_budget(self):
        with pytest.raises(WillConstraintError):
            WillTable({1: 1.0, 2: 0.6, 3: 0.5}, players=[1])

    def test_negative(self):
        with pytest.raises(WillConstraintError):
            WillTable({1: 2.0, 2: -1.0, 3: 1.0}, players=[1, 2, 3])

    def test_with_agent_fails_instead_of_renormalising(self):
        w = WillTable({1: 1.0, 2: 0.8}, players=[1])
        with pytest.raises(WillConstraintError):
            w.with_agent(3, Role.SUPPORTER, 0.3)
        assert w.with_agent(3, Role.SUPPORTER, 0.2).supporter_sum == pytest.approx(1.0, abs=1e-12)

    def test_missing_player(self):
        with pytest.raises(WillConstraintError):
            WillTable({1: 1.0}, players=[1, 2])
