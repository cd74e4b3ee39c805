"""Screening against lending by prior alone on the generated lending pools."""
import functools
import os

import numpy as np
import pytest

from lib.model import SolveStatus
from lib.optimizer import (
    SweepConfig,
    alpha_grid_from_step,
    frontier_constraints,
    no_screening_baseline,
    pareto_frontier,
    sweep_solve,
)
from pipeline.ingestion.german_credit import load_german
from pipeline.ingestion.synthetic import REGIMES, config_for_regime, gen_synthetic
from pipeline.transformation.instances import build_german_instance
from pipeline.transformation.scoring import fit_logistic

pytestmark = pytest.mark.slow

GERMAN_CREDIT_PATH = os.getenv("GERMAN_CREDIT_PATH")


def regime_config():
    return SweepConfig(
        alpha_grid=alpha_grid_from_step(0.05),
        lambda_grid=tuple(float(v) for v in np.linspace(0.0, 25000.0, 6)),
        max_candidates=30,
    )


@functools.lru_cache(maxsize=None)
def regime_frontiers(regime):
    instance = gen_synthetic(config_for_regime(regime, seed=7))
    config = regime_config()
    screen = pareto_frontier(instance, config, with_screening=True)
    noscreen = pareto_frontier(instance, config, with_screening=False)
    return list(zip(screen, noscreen))


@pytest.mark.parametrize("regime", sorted(REGIMES))
def test_screening_dominates_in_every_regime(regime):
    feasible = 0
    for (lam, s), (_, b) in regime_frontiers(regime):
        if b.status is SolveStatus.OPTIMAL:
            feasible += 1
            assert s.status is SolveStatus.OPTIMAL, f"λ={lam}"
            assert s.expected_utility >= b.expected_utility - 1e-6, f"λ={lam}"
    assert feasible > 0


def test_informative_cheap_screening_gains_at_largest_target():
    """At the largest target both sides reach, screening adds at least 5%"""
    both = [(lam, s, b) for (lam, s), (_, b) in regime_frontiers("hi-val-lo-cost") if s.is_optimal and b.is_optimal]
    lam, screened, baseline = both[-1]
    assert baseline.expected_utility > 0
    assert screened.expected_utility >= 1.05 * baseline.expected_utility, f"λ={lam}"


@pytest.mark.skipif(not GERMAN_CREDIT_PATH, reason="GERMAN_CREDIT_PATH not set")
def test_german_screening_beats_baseline():
    records = load_german(GERMAN_CREDIT_PATH)
    _, probabilities = fit_logistic(records)
    instance = build_german_instance(records, probabilities)
    lambda_target = 50000.0

    baseline = no_screening_baseline(instance, lambda_target)
    config = SweepConfig(alpha_grid=alpha_grid_from_step(0.1), max_candidates=40)
    screened = sweep_solve(instance.with_constraints(frontier_constraints(2, lambda_target)), config)

    assert baseline.status is SolveStatus.OPTIMAL
    assert screened.status is SolveStatus.OPTIMAL
    assert baseline.expected_utility == pytest.approx(102000.0, rel=0.15)
    assert screened.expected_utility >= 1.10 * baseline.expected_utility
