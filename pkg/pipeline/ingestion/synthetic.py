import logging
from dataclasses import dataclass, replace
from typing import Dict, Tuple

import numpy as np

from lib.errors import DomainError
from lib.model import Applicant, DiscreteDistribution, ProblemInstance, UtilitySpec
from lib.special import beta_cdf

logger = logging.getLogger(__name__)

DEFAULT_UTILITY = UtilitySpec(repay_value=1000.0, default_value=-200.0)

# regime name -> (posterior count, screening cost)
REGIMES: Dict[str, Tuple[float, float]] = {
    "hi-val-lo-cost": (5.0, 25.0),
    "hi-val-hi-cost": (5.0, 100.0),
    "lo-val-lo-cost": (25.0, 25.0),
    "lo-val-hi-cost": (25.0, 100.0),
}


@dataclass(frozen=True)
class SyntheticConfig:
    """Parameters of a synthetic two-group lending pool.

    Beta distributions are parameterised by mean and count (count = a + b).
    A smaller ``post_count`` makes screening more informative.
    """
    n: int = 500
    targeted_mean: float = 0.5
    untargeted_mean: float = 0.70
    prior_count: float = 50.0
    post_count: float = 5.0
    screen_cost: float = 25.0
    alloc_cost: float = 1000.0
    budget: float = 50000.0
    bins: int = 101
    seed: int = 7

    def validate(self) -> None:
        for name in ("targeted_mean", "untargeted_mean"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise DomainError(f"{name} must lie in (0, 1), got {value}")
        for name in ("prior_count", "post_count"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")
        if self.bins < 2:
            raise DomainError(f"bins must be at least 2, got {self.bins}")
        if self.n < 0:
            raise DomainError(f"n must be non-negative, got {self.n}")


def config_for_regime(regime: str, **overrides) -> SyntheticConfig:
    """Synthetic config for one of the four value/cost regimes.

    Args:
        regime: One of ``REGIMES``
        **overrides: Other SyntheticConfig fields

    Returns:
        SyntheticConfig: Config with the regime's posterior count and screening cost
    """
    if regime not in REGIMES:
        raise DomainError(f"unknown regime {regime!r}, expected one of {sorted(REGIMES)}")
    post_count, screen_cost = REGIMES[regime]
    return replace(SyntheticConfig(), post_count=post_count, screen_cost=screen_cost, **overrides)


def discretize_beta(mean: float, count: float, bins: int) -> DiscreteDistribution:
    """Discretise Beta(mean·count, (1−mean)·count) onto bin midpoints.

    Args:
        mean: Mean in (0, 1)
        count: Count parameter, positive
        bins: Number K of equal-width bins on [0, 1]

    Returns:
        DiscreteDistribution: Support (2k+1)/(2K), probabilities from CDF
            differences, renormalised to sum to one
    """
    a, b = mean * count, (1.0 - mean) * count
    if not (a > 0 and b > 0):
        raise DomainError(f"degenerate beta shapes a={a}, b={b} from mean={mean}, count={count}")
    if bins < 2:
        raise DomainError(f"bins must be at least 2, got {bins}")
    edges = np.arange(bins + 1) / bins
    mass = np.clip(np.diff(beta_cdf(edges, a, b)), 0.0, None)
    probs = mass / mass.sum()
    support = (2 * np.arange(bins) + 1) / (2 * bins)
    return DiscreteDistribution.from_arrays(support, probs)


def gen_synthetic(config: SyntheticConfig, utility: UtilitySpec = DEFAULT_UTILITY) -> ProblemInstance:
    """Generate a two-group pool with screenable targeted applicants.

    Group 0 (the first n // 2 applicants) is targeted: creditworthiness is
    drawn from the targeted prior and screening reveals a discretised beta
    posterior. Group 1 cannot be screened.

    Args:
        config: Generator parameters
        utility: Utility of repayment and default

    Returns:
        ProblemInstance: Instance with no constraints
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    n_targeted = config.n // 2
    n_other = config.n - n_targeted
    targeted_x = rng.beta(config.targeted_mean * config.prior_count,
                          (1.0 - config.targeted_mean) * config.prior_count, size=n_targeted)
    other_x = rng.beta(config.untargeted_mean * config.prior_count,
                       (1.0 - config.untargeted_mean) * config.prior_count, size=n_other)

    applicants = []
    for i, x in enumerate(targeted_x):
        mu = float(utility.map_array(x))
        beta_bins = discretize_beta(float(x), config.post_count, config.bins)
        support, probs = beta_bins.as_arrays()
        posterior = DiscreteDistribution.from_arrays(utility.map_array(support), probs).recentered(mu)
        applicants.append(Applicant(i, 0, mu, posterior, config.screen_cost, config.alloc_cost))
    for k, x in enumerate(other_x):
        applicants.append(Applicant(n_targeted + k, 1, float(utility.map_array(x)), None,
                                    config.screen_cost, config.alloc_cost))
    logger.info(f"Generated synthetic pool: {n_targeted} targeted, {n_other} other, seed {config.seed}")
    return ProblemInstance(tuple(applicants), num_groups=2, budget=config.budget, utility=utility)


def stylized_instance() -> ProblemInstance:
    """Thirteen-applicant example with a $2,000 budget.

    Eight applicants without credit history (group 0) have expected utility
    500 and screening reveals 0 or 1000 with equal odds; five applicants
    with history (group 1) have utility 750 and cannot be screened. Screening
    costs 50 and a loan costs 400.
    """
    posterior = DiscreteDistribution((0.0, 1000.0), (0.5, 0.5))
    applicants = [Applicant(i, 0, 500.0, posterior, 50.0, 400.0) for i in range(8)]
    applicants += [Applicant(8 + k, 1, 750.0, None, 50.0, 400.0) for k in range(5)]
    return ProblemInstance(tuple(applicants), num_groups=2, budget=2000.0,
                           utility=UtilitySpec(repay_value=1000.0, default_value=0.0))
