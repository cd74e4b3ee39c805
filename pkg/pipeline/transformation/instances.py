import logging
from typing import List, Sequence

import numpy as np

from lib.errors import StructuralError
from lib.model import (
    Applicant,
    DiscreteDistribution,
    ProblemInstance,
    UtilitySpec,
    utility_from_repay_prob,
)
from pipeline.ingestion.german_credit import GermanRecord
from pipeline.ingestion.synthetic import DEFAULT_UTILITY

logger = logging.getLogger(__name__)

MAX_POSTERIOR_BINS = 201


def empirical_distribution(values: Sequence[float], max_bins: int = MAX_POSTERIOR_BINS) -> DiscreteDistribution:
    """Equal-count binning of sorted values into at most ``max_bins`` atoms.

    Each bin contributes its mean with probability proportional to its size;
    bins with equal means are merged.
    """
    values = np.sort(np.asarray(values, dtype=float))
    if values.size == 0:
        raise StructuralError("cannot build a distribution from no values")
    chunks = np.array_split(values, min(max_bins, values.size))
    means = np.array([chunk.mean() for chunk in chunks])
    weights = np.array([chunk.size for chunk in chunks], dtype=float) / values.size
    support, inverse = np.unique(means, return_inverse=True)
    probs = np.bincount(inverse, weights=weights, minlength=support.size)
    return DiscreteDistribution.from_arrays(support, probs / probs.sum())


def build_german_instance(records: List[GermanRecord], probabilities: Sequence[float],
                          screen_cost: float = 100.0, alloc_cost: float = 1000.0, budget: float = 150000.0,
                          utility: UtilitySpec = DEFAULT_UTILITY,
                          max_bins: int = MAX_POSTERIOR_BINS) -> ProblemInstance:
    """Lending instance from scored German Credit records.

    Applicants who own their residence (group 1) are scored individually
    and cannot be screened. The targeted group (group 0) is only known by
    its base rate; screening reveals the applicant's model score, whose
    prior is the shared empirical distribution of targeted scores rescaled
    to the base-rate utility.

    Args:
        records: German Credit records in file order
        probabilities: Fitted probability of good credit per record
        screen_cost: Screening cost per applicant
        alloc_cost: Loan size per applicant
        budget: Total budget
        utility: Utility of repayment and default
        max_bins: Largest number of posterior atoms

    Returns:
        ProblemInstance: Two-group instance with ids in record order
    """
    probabilities = np.asarray(probabilities, dtype=float)
    if probabilities.shape != (len(records),):
        raise StructuralError(f"{probabilities.size} probabilities for {len(records)} records")
    targeted = np.array([r.targeted for r in records], dtype=bool)
    if not targeted.any():
        raise StructuralError("no targeted records")
    base_rate = float(np.mean([r.good for r, t in zip(records, targeted) if t]))
    targeted_mu = utility_from_repay_prob(utility, base_rate)
    scores = utility.map_array(probabilities[targeted])
    posterior = empirical_distribution(scores, max_bins).recentered(targeted_mu)

    applicants = []
    for i, (record, x) in enumerate(zip(records, probabilities)):
        if record.targeted:
            applicants.append(Applicant(i, 0, targeted_mu, posterior, screen_cost, alloc_cost))
        else:
            applicants.append(Applicant(i, 1, utility_from_repay_prob(utility, float(x)), None,
                                        screen_cost, alloc_cost))
    logger.info(
        f"Built German instance: {int(targeted.sum())} targeted (base rate {base_rate:.3f}), "
        f"{int((~targeted).sum())} other, posterior with {len(posterior)} atoms"
    )
    return ProblemInstance(tuple(applicants), num_groups=2, budget=budget, utility=utility)
