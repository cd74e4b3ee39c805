import sys
from pathlib import Path
from typing import Sequence

import numpy as np
import pytest

# Add the project root to the Python path
sys.path.append(str(Path(__file__).parent.parent))

from lib.model import Applicant, DiscreteDistribution, ProblemInstance  # noqa: E402
from pipeline.ingestion.synthetic import stylized_instance  # noqa: E402


def make_tiny_instance(seed: int, n: int = 5, num_groups: int = 2, max_support: int = 3,
                       screen_share: float = 0.6, pointmass_groups: Sequence[int] = (),
                       budget_share: float = 0.5) -> ProblemInstance:
    """Small random instance with integer supports and power-of-two loan costs.

    The first ``num_groups`` applicants are placed one per group so no group
    is empty.
    """
    rng = np.random.default_rng(seed)
    applicants = []
    for i in range(n):
        group = i if i < num_groups else int(rng.integers(num_groups))
        alloc_cost = float(2 ** int(rng.integers(0, 3)))
        screen_cost = float(rng.choice([0.0, 0.5, 1.0]))
        if group in pointmass_groups or rng.random() > screen_share:
            posterior = None
            mu = float(rng.integers(-2, 11))
        else:
            k = int(rng.integers(1, max_support + 1))
            support = np.sort(rng.choice(np.arange(-4, 13), size=k, replace=False)).astype(float)
            weights = rng.integers(1, 5, size=k).astype(float)
            posterior = DiscreteDistribution.from_arrays(support, weights / weights.sum())
            mu = posterior.mean()
        applicants.append(Applicant(i, group, mu, posterior, screen_cost, alloc_cost))
    total = sum(a.alloc_cost for a in applicants)
    return ProblemInstance(tuple(applicants), num_groups, budget=budget_share * total)


@pytest.fixture
def stylized() -> ProblemInstance:
    return stylized_instance()


@pytest.fixture
def tiny_instance():
    return make_tiny_instance
