import math

import numpy as np
import pytest

from lib.coefficients import (
    CoefficientTable,
    Coefficients,
    build_tables,
    compare_to_threshold,
    derive_coefficients,
)
from lib.errors import StructuralError
from lib.model import Applicant, DiscreteDistribution, ThresholdPolicy


def test_compare_to_threshold():
    above, at = compare_to_threshold(np.array([1.0, 2.0, 3.0, np.nan]), 1.0, 2.0)
    assert above.tolist() == [False, False, True, False]
    assert at.tolist() == [False, True, False, False]


def test_compare_to_threshold_tolerance():
    """Values within 1e-12 of the threshold count as at the threshold"""
    above, at = compare_to_threshold(np.array([0.3 * 3]), 1.0, 0.9)
    assert at.tolist() == [True]
    assert above.tolist() == [False]


def test_compare_to_infinite_thresholds():
    values = np.array([-5.0, 0.0, np.nan])
    above, at = compare_to_threshold(values, 1.0, -math.inf)
    assert above.tolist() == [True, True, False]
    assert not at.any()
    above, at = compare_to_threshold(values, 1.0, math.inf)
    assert not above.any() and not at.any()


def test_stylized_coefficients(stylized):
    """Screened atom at zero gets weight α; the unscreened mean sits above zero"""
    policy = ThresholdPolicy((0.0, math.inf), (0.5, 0.0))
    coeffs = derive_coefficients(stylized.applicants[0], policy)
    assert coeffs == Coefficients(q=0.75, qe=500.0, o=1.0)
    assert derive_coefficients(stylized.applicants[8], policy) == Coefficients(q=0.0, qe=0.0, o=0.0)


def test_unscreenable_coefficients():
    applicant = Applicant(0, 0, 6.0, None, 1.0, 2.0)
    coeffs = derive_coefficients(applicant, ThresholdPolicy((3.0,), (0.25,)))
    assert coeffs == Coefficients(q=0.25, qe=1.5, o=0.25)


def test_infinite_thresholds():
    applicant = Applicant(0, 0, 2.0, DiscreteDistribution((-4.0, 8.0), (0.5, 0.5)), 1.0, 4.0)
    assert derive_coefficients(applicant, ThresholdPolicy((-math.inf,), (0.0,))) == Coefficients(1.0, 2.0, 1.0)
    assert derive_coefficients(applicant, ThresholdPolicy((math.inf,), (1.0,))) == Coefficients(0.0, 0.0, 0.0)


def test_group_out_of_range():
    with pytest.raises(StructuralError):
        derive_coefficients(Applicant(0, 2, 1.0, None, 0.0, 1.0), ThresholdPolicy((0.0,), (0.0,)))


def test_table_matches_scalar_form(tiny_instance):
    """Vectorised parts agree with derive_coefficients at every candidate and α"""
    for seed in range(15):
        instance = tiny_instance(seed, n=6)
        for table in build_tables(instance):
            for t in [-math.inf, math.inf] + sorted(set(table.candidate_values().tolist())):
                parts = table.parts(t)
                for alpha in (0.0, 0.3, 1.0):
                    q, qe, o = parts.at(alpha)
                    policy = ThresholdPolicy.uniform(instance.num_groups, t, alpha)
                    for k, i in enumerate(table.positions):
                        expected = derive_coefficients(instance.applicants[i], policy)
                        assert q[k] == pytest.approx(expected.q, abs=1e-12)
                        assert qe[k] == pytest.approx(expected.qe, abs=1e-12)
                        assert o[k] == pytest.approx(expected.o, abs=1e-12)


def test_tower_bounds(tiny_instance):
    """q lies in [0, 1] and qe never exceeds the positive part of the posterior"""
    instance = tiny_instance(3, n=6)
    for table in build_tables(instance):
        for t in sorted(set(table.candidate_values().tolist())):
            q, qe, _ = table.parts(t).at(1.0)
            assert np.all((q >= 0) & (q <= 1))
            positive = (np.clip(np.nan_to_num(table.support), 0, None) * table.probs).sum(axis=1)
            bound = np.where(table.screenable, positive, np.clip(table.mu, 0, None))
            assert np.all(qe <= bound + 1e-12)


def test_candidate_values(stylized):
    table = CoefficientTable(stylized, 0)
    assert sorted(set(table.candidate_values().tolist())) == [0.0, 1.25, 2.5]
    assert len(table) == 8


def random_posterior(rng, low, high, size=4):
    support = np.sort(rng.choice(np.arange(low, high), size=size, replace=False)).astype(float)
    weights = rng.integers(1, 5, size=size).astype(float)
    return DiscreteDistribution.from_arrays(support, weights / weights.sum())


def test_q_non_increasing_in_threshold(tiny_instance):
    """Raising the threshold never admits more mass, for any fixed α"""
    for seed in range(10):
        instance = tiny_instance(seed, n=6)
        for table in build_tables(instance):
            values = table.candidate_values()
            finite = values[np.isfinite(values)]
            grid = np.linspace(finite.min() - 1.0, finite.max() + 1.0, 100)
            for alpha in (0.0, 0.4, 1.0):
                q = np.array([table.parts(t).at(alpha)[0] for t in grid])
                assert np.all(np.diff(q, axis=0) <= 1e-12)


def test_qe_non_increasing_for_non_negative_support():
    rng = np.random.default_rng(5)
    grid = np.linspace(-1.0, 11.0, 100)
    for _ in range(20):
        posterior = random_posterior(rng, 0, 20)
        applicant = Applicant(0, 0, posterior.mean(), posterior, 1.0, 2.0)
        for alpha in (0.0, 0.5, 1.0):
            qe = [derive_coefficients(applicant, ThresholdPolicy((t,), (alpha,))).qe for t in grid]
            assert np.all(np.diff(qe) <= 1e-12)


def test_coefficients_affine_in_alpha_at_atoms():
    """At a support point q and qe move on a line as α varies"""
    rng = np.random.default_rng(9)
    for _ in range(20):
        posterior = random_posterior(rng, -4, 13)
        applicant = Applicant(0, 0, posterior.mean(), posterior, 0.5, 2.0)
        for value in posterior.support:
            t = value / applicant.alloc_cost
            lo, mid, hi = (derive_coefficients(applicant, ThresholdPolicy((t,), (a,))) for a in (0.0, 0.3, 1.0))
            assert mid.q == pytest.approx(lo.q + 0.3 * (hi.q - lo.q), abs=1e-12)
            assert mid.qe == pytest.approx(lo.qe + 0.3 * (hi.qe - lo.qe), abs=1e-12)
            assert hi.q > lo.q


def test_unscreened_share_is_zero_alpha_or_one(tiny_instance):
    instance = tiny_instance(4, n=6)
    for alpha in (0.0, 0.35, 1.0):
        for table in build_tables(instance):
            for t in [-math.inf, math.inf] + sorted(set(table.candidate_values().tolist())):
                policy = ThresholdPolicy.uniform(instance.num_groups, t, alpha)
                for i in table.positions:
                    assert derive_coefficients(instance.applicants[i], policy).o in (0.0, alpha, 1.0)
