import math
import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from lib.errors import DomainError

logger = logging.getLogger(__name__)

TOWER_TOLERANCE = 1e-9
PROBABILITY_SUM_TOLERANCE = 1e-12


class ConstraintMode(Enum):
    """How a diversity constraint binds the group's expected utility."""
    AT_LEAST = "at_least"
    EXACTLY = "exactly"


class SolveStatus(Enum):
    """Outcome of an optimization."""
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


def _as_tuple(obj, name: str, cast=float) -> None:
    value = getattr(obj, name)
    if not isinstance(value, tuple):
        object.__setattr__(obj, name, tuple(cast(v) for v in value))


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite law of a post-screening utility estimate.

    Values are in utility units. Constructing a distribution does not check
    its invariants; ``validate_instance`` reports them.
    """
    support: Tuple[float, ...]
    probs: Tuple[float, ...]

    def __post_init__(self):
        _as_tuple(self, "support")
        _as_tuple(self, "probs")

    def __len__(self) -> int:
        return len(self.support)

    @classmethod
    def from_arrays(cls, support: np.ndarray, probs: np.ndarray) -> "DiscreteDistribution":
        return cls(tuple(float(v) for v in support), tuple(float(p) for p in probs))

    @classmethod
    def point_mass(cls, value: float) -> "DiscreteDistribution":
        return cls((float(value),), (1.0,))

    def as_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.support, dtype=float), np.asarray(self.probs, dtype=float)

    def mean(self) -> float:
        support, probs = self.as_arrays()
        return float(np.dot(support, probs))

    def variance(self) -> float:
        support, probs = self.as_arrays()
        centered = support - self.mean()
        return float(np.dot(centered * centered, probs))

    def recentered(self, target: float) -> "DiscreteDistribution":
        """Shift or rescale the support so the mean equals ``target``.

        Scaling is multiplicative when the target and the current mean are
        both positive, otherwise the support is shifted additively.

        Args:
            target: Required mean

        Returns:
            DiscreteDistribution: Distribution with the same probabilities
        """
        support, probs = self.as_arrays()
        current = float(np.dot(support, probs))
        if target > 0 and current > 0:
            support = support * (target / current)
        else:
            support = support + (target - current)
        return DiscreteDistribution.from_arrays(support, probs)


@dataclass(frozen=True)
class UtilitySpec:
    """Utility of a repaid loan (a) and of a default (b)."""
    repay_value: float
    default_value: float

    def value(self, x: float) -> float:
        return utility_from_repay_prob(self, x)

    def map_array(self, x: np.ndarray) -> np.ndarray:
        """Vectorised ``utility_from_repay_prob`` (no domain check)."""
        x = np.asarray(x, dtype=float)
        return self.repay_value * x + self.default_value * (1.0 - x)


def utility_from_repay_prob(utility: UtilitySpec, x: float) -> float:
    """Expected utility a·x + b·(1−x) of lending at repayment probability x.

    Args:
        utility: Utility of repayment and default
        x: Repayment probability in [0, 1]

    Returns:
        float: Expected utility

    Raises:
        DomainError: If x is outside [0, 1]
    """
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"repayment probability {x} outside [0, 1]")
    return utility.repay_value * x + utility.default_value * (1.0 - x)


@dataclass(frozen=True)
class Applicant:
    """One applicant in the pool.

    ``posterior`` is None when screening reveals nothing about the applicant.
    """
    id: int
    group: int
    mu: float
    posterior: Optional[DiscreteDistribution]
    screen_cost: float
    alloc_cost: float

    @property
    def screenable(self) -> bool:
        return self.posterior is not None


@dataclass(frozen=True)
class DiversityConstraint:
    """Floor (or exact target) on a group's expected allocated utility."""
    group: int
    target: float
    mode: ConstraintMode = ConstraintMode.AT_LEAST

    def __post_init__(self):
        if not isinstance(self.mode, ConstraintMode):
            object.__setattr__(self, "mode", ConstraintMode(self.mode))


@dataclass(frozen=True)
class ProblemInstance:
    """Full optimization input: pool, groups, budget, constraints."""
    applicants: Tuple[Applicant, ...]
    num_groups: int
    budget: float
    constraints: Tuple[DiversityConstraint, ...] = ()
    utility: Optional[UtilitySpec] = None

    def __post_init__(self):
        if not isinstance(self.applicants, tuple):
            object.__setattr__(self, "applicants", tuple(self.applicants))
        if not isinstance(self.constraints, tuple):
            object.__setattr__(self, "constraints", tuple(self.constraints))

    @property
    def n(self) -> int:
        return len(self.applicants)

    def group_members(self, group: int) -> List[int]:
        """Positions (not ids) of the applicants in a group, in pool order."""
        return [i for i, a in enumerate(self.applicants) if a.group == group]

    def is_pointmass_group(self, group: int) -> bool:
        """True when no applicant of the group can be screened."""
        return all(not self.applicants[i].screenable for i in self.group_members(group))

    def constraints_for(self, group: int) -> List[DiversityConstraint]:
        return [c for c in self.constraints if c.group == group]

    def with_constraints(self, constraints: Sequence[DiversityConstraint]) -> "ProblemInstance":
        return replace(self, constraints=tuple(constraints))

    def with_budget(self, budget: float) -> "ProblemInstance":
        return replace(self, budget=float(budget))


@dataclass(frozen=True)
class ThresholdPolicy:
    """Per-group allocation rule on cost-normalised estimates Û/c.

    Thresholds may be ``-inf`` (allocate everyone) or ``inf`` (allocate no one).
    """
    thresholds: Tuple[float, ...]
    boundary_probs: Tuple[float, ...]

    def __post_init__(self):
        _as_tuple(self, "thresholds")
        _as_tuple(self, "boundary_probs")

    @property
    def num_groups(self) -> int:
        return len(self.thresholds)

    @classmethod
    def closed(cls, num_groups: int) -> "ThresholdPolicy":
        """Policy that allocates to no one."""
        return cls((math.inf,) * num_groups, (0.0,) * num_groups)

    @classmethod
    def uniform(cls, num_groups: int, threshold: float, boundary_prob: float = 0.0) -> "ThresholdPolicy":
        return cls((float(threshold),) * num_groups, (float(boundary_prob),) * num_groups)

    def with_group(self, group: int, threshold: float, boundary_prob: float) -> "ThresholdPolicy":
        thresholds = list(self.thresholds)
        probs = list(self.boundary_probs)
        thresholds[group] = float(threshold)
        probs[group] = float(boundary_prob)
        return ThresholdPolicy(tuple(thresholds), tuple(probs))


@dataclass(frozen=True)
class ScreeningPolicy:
    """Independent per-applicant screening probabilities."""
    probs: Tuple[float, ...]

    def __post_init__(self):
        _as_tuple(self, "probs")

    def __len__(self) -> int:
        return len(self.probs)

    @classmethod
    def zeros(cls, n: int) -> "ScreeningPolicy":
        return cls((0.0,) * n)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)


@dataclass(frozen=True)
class SolveResult:
    """Optimal screening and allocation policies with their totals."""
    screening: ScreeningPolicy
    allocation: ThresholdPolicy
    expected_utility: float
    expected_cost: float
    group_utilities: Tuple[float, ...]
    status: SolveStatus
    lp_objective: Optional[float] = None
    lp_cost: Optional[float] = None
    lp_solves: int = 0
    lambda_target: Optional[float] = None

    def __post_init__(self):
        _as_tuple(self, "group_utilities")

    @property
    def is_optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    @classmethod
    def infeasible(cls, instance: ProblemInstance, lp_solves: int = 0,
                   lambda_target: Optional[float] = None) -> "SolveResult":
        return cls(
            screening=ScreeningPolicy.zeros(instance.n),
            allocation=ThresholdPolicy.closed(instance.num_groups),
            expected_utility=0.0,
            expected_cost=0.0,
            group_utilities=(0.0,) * instance.num_groups,
            status=SolveStatus.INFEASIBLE,
            lp_solves=lp_solves,
            lambda_target=lambda_target,
        )

    def summary(self) -> Dict[str, float]:
        return {
            "status": self.status.value,
            "expected_utility": self.expected_utility,
            "expected_cost": self.expected_cost,
        }
