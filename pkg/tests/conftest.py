from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from stratcomm.problem import DsbsParams, ProblemSpec, dsbs_to_problem, hamming

DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def dsbs03():
    return dsbs_to_problem(DsbsParams.symmetric(0.3, 0.4))


def random_problem(rng: np.random.Generator, u=2, z=2, v=2, capacity=0.3) -> ProblemSpec:
    p_uz = rng.dirichlet(np.ones(u * z)).reshape(u, z)
    d_e = rng.random((u, z, v))
    d_d = rng.random((u, z, v))
    return ProblemSpec(p_uz, d_e, d_d, capacity=capacity)


def matched_dsbs(delta: float) -> ProblemSpec:
    base = dsbs_to_problem(DsbsParams.symmetric(delta, 0.0))
    d = np.repeat(hamming(2)[:, None, :], 2, axis=1)
    return base.with_distortions(d_e=d, d_d=d)


def simplex_points(dim: int):
    """Hypothesis strategy for points of the probability simplex in ``dim`` coordinates."""
    return st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=dim, max_size=dim).filter(
        lambda xs: sum(xs) > 1e-6).map(lambda xs: np.array(xs) / sum(xs))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
