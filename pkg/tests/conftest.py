import numpy as np
import pytest

import mtlearn as mt

# Frozen desk-scale foraging fixture: two level-1 agents start adjacent to a
# level-2 food on a 5x5 grid, so collecting it requires a simultaneous load.
FIXTURE_ROWS = (".....", "..1..", "..b..", "..1..", ".....")
FIXTURE_HORIZON = 16
FIXTURE_LEVELS = (0.3, 0.05)
FIXTURE_SWITCH = 500
FIXTURE_EPSILON = (1.0, 0.01, 30000)
FIXTURE_DISCOUNT = 0.95
FIXTURE_TOTAL_STEPS = 50000
FIXTURE_EVAL_EVERY = 2500
FIXTURE_EVAL_EPISODES = 5

MATCH_PAYOFF = [[1.0, 0.0], [0.0, 1.0]]
CLIMBING_PAYOFF = [[11.0, -30.0, 0.0], [-30.0, 7.0, 6.0], [0.0, 0.0, 5.0]]


def fixture_env_factory():
    return mt.ForagingEnv(
        mt.foraging_config_from_ascii(list(FIXTURE_ROWS), horizon=FIXTURE_HORIZON,
                                      cooperative_only=True))


@pytest.fixture
def coupled_problem():
    return mt.build_problem(1.0, 1.0, 0.5, 3)


@pytest.fixture
def match_game():
    return mt.make_game(MATCH_PAYOFF)


@pytest.fixture
def climbing_game():
    return mt.make_game(CLIMBING_PAYOFF)


def random_team_game(rng: np.random.Generator) -> mt.TeamGame:
    n = int(rng.integers(2, 5))
    counts = tuple(int(rng.integers(2, 4)) for _ in range(n))
    return mt.make_game(rng.uniform(0.0, 1.0, size=counts))
