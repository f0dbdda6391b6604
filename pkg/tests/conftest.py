import numpy as np
import pytest

from splitplan.problem import PlanProblem


def random_problem(rng: np.random.Generator, max_layers: int = 14) -> PlanProblem:
    """Random integer instance with budget tension: W is drawn near the total
    client compute so full offload is rarely free."""
    L = int(rng.integers(2, max_layers + 1))
    i = rng.integers(0, 21, L)
    s = rng.integers(0, 21, L)
    u = rng.integers(0, 21, L)
    d = rng.integers(0, 21, L)
    r = rng.integers(0, 101, L).astype(float)
    W = int(min(200, rng.integers(0, max(1, int(i.sum()) + 20))))
    sac = bool(rng.integers(0, 2))
    return PlanProblem.from_costs(i, s, u, d, r, W, source_at_client=sac)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
