import numpy as np
import pytest

from lfdbench.core import Dataset, RandomSource
from lfdbench.envs import GridWorld


@pytest.fixture
def rng():
    return RandomSource(12345)


def make_dataset(states, labels, per_traj=None, tag="initial-demo"):
    data = Dataset()
    per_traj = per_traj or len(states)
    for i in range(0, len(states), per_traj):
        data.add_trajectory(list(states[i:i + per_traj]), list(labels[i:i + per_traj]), tag)
    return data


def open_world(width=5, height=5, goal=(4, 4), penalties=(), slip=0.0, horizon=30):
    return GridWorld(width, height, goal=goal, penalties=frozenset(penalties),
                     slip_prob=slip, horizon=horizon)


def binom_band(p, n, k=3.0):
    return k * np.sqrt(p * (1 - p) / n)


# Acceptance criteria register a one-line verdict here; printed at session end.
ACCEPTANCE_LINES: dict[int, str] = {}


def report(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
