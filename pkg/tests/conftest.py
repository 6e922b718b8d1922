from __future__ import annotations

import numpy as np
import pytest
from hypothesis import strategies as st

from qcss.model import N_COORDS, StateVector, Team

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)


@st.composite
def states(draw, coord=finite):
    coords = draw(st.lists(coord, min_size=N_COORDS, max_size=N_COORDS))
    team = draw(st.sampled_from([Team.HOME, Team.GUEST]))
    player = draw(st.integers(1, 11))
    return StateVector(np.array(coords), team, player)


def random_state(rng: np.random.Generator, scale: float = 50.0) -> StateVector:
    team = Team.HOME if rng.random() < 0.5 else Team.GUEST
    return StateVector(rng.uniform(-scale, scale, N_COORDS), team, int(rng.integers(1, 12)))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


# acceptance verdicts, echoed in the terminal summary so they survive output capture
VERDICTS: list[str] = []


def verdict(number: int, title: str, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} ({detail})"
    VERDICTS.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
