import math
import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np

from lib.model import (
    Applicant,
    ConstraintMode,
    DiscreteDistribution,
    ProblemInstance,
    PROBABILITY_SUM_TOLERANCE,
    TOWER_TOLERANCE,
)

logger = logging.getLogger(__name__)


class InvariantRule(Enum):
    """Invariants checked on a problem instance."""
    PROBS_LENGTH = "probs_length"
    PROBS_NON_NEGATIVE = "probs_non_negative"
    PROBS_SUM = "probs_sum"
    SUPPORT_INCREASING = "support_strictly_increasing"
    SUPPORT_FINITE = "support_finite"
    ITERATED_EXPECTATIONS = "iterated_expectations"
    ALLOC_COST_POSITIVE = "alloc_cost_positive"
    SCREEN_COST_NON_NEGATIVE = "screen_cost_non_negative"
    GROUP_RANGE = "group_range"
    DUPLICATE_ID = "duplicate_id"
    NUM_GROUPS = "num_groups"
    BUDGET_NON_NEGATIVE = "budget_non_negative"
    CONSTRAINT_COUNT = "constraint_count"
    CONSTRAINT_GROUP = "constraint_group"
    CONSTRAINT_TARGET = "constraint_target"
    EXACT_PER_GROUP = "single_exact_constraint_per_group"
    UTILITY_ORDER = "repay_value_above_default_value"


@dataclass(frozen=True)
class Violation:
    """A broken invariant, naming the applicant (if any) and the rule."""
    rule: InvariantRule
    message: str
    applicant_id: Optional[int] = None

    def __str__(self) -> str:
        who = f"applicant {self.applicant_id}" if self.applicant_id is not None else "instance"
        return f"{who}: {self.rule.value}: {self.message}"


class InstanceValidator:
    """Checks a problem instance against the domain-type invariants."""

    def __init__(self, instance: ProblemInstance):
        self.instance = instance
        self.violations: List[Violation] = []

    def run(self) -> List[Violation]:
        """Run every check.

        Returns:
            List[Violation]: Empty when the instance is valid
        """
        self.violations = []
        self._check_instance()
        seen = set()
        for applicant in self.instance.applicants:
            if applicant.id in seen:
                self._add(InvariantRule.DUPLICATE_ID, "id appears more than once", applicant.id)
            seen.add(applicant.id)
            self._check_applicant(applicant)
        self._check_constraints()
        if self.violations:
            logger.debug(f"Instance has {len(self.violations)} violations")
        return list(self.violations)

    def _add(self, rule: InvariantRule, message: str, applicant_id: Optional[int] = None) -> None:
        self.violations.append(Violation(rule, message, applicant_id))

    def _check_instance(self) -> None:
        inst = self.instance
        if inst.num_groups < 1:
            self._add(InvariantRule.NUM_GROUPS, f"num_groups {inst.num_groups} < 1")
        if not (inst.budget >= 0) or not math.isfinite(inst.budget):
            self._add(InvariantRule.BUDGET_NON_NEGATIVE, f"budget {inst.budget} is not a finite non-negative value")
        if inst.utility is not None and not inst.utility.repay_value > inst.utility.default_value:
            self._add(
                InvariantRule.UTILITY_ORDER,
                f"repay_value {inst.utility.repay_value} <= default_value {inst.utility.default_value}",
            )

    def _check_applicant(self, applicant: Applicant) -> None:
        aid = applicant.id
        if not (0 <= applicant.group < self.instance.num_groups):
            self._add(InvariantRule.GROUP_RANGE,
                      f"group {applicant.group} outside [0, {self.instance.num_groups})", aid)
        if not applicant.alloc_cost > 0:
            self._add(InvariantRule.ALLOC_COST_POSITIVE, f"alloc_cost {applicant.alloc_cost} <= 0", aid)
        if not applicant.screen_cost >= 0:
            self._add(InvariantRule.SCREEN_COST_NON_NEGATIVE, f"screen_cost {applicant.screen_cost} < 0", aid)
        if applicant.posterior is not None:
            self._check_distribution(applicant.posterior, applicant.mu, aid)

    def _check_distribution(self, dist: DiscreteDistribution, mu: float, aid: int) -> None:
        if len(dist.support) != len(dist.probs) or len(dist.support) == 0:
            self._add(InvariantRule.PROBS_LENGTH,
                      f"support has {len(dist.support)} points but probs has {len(dist.probs)}", aid)
            return
        support, probs = dist.as_arrays()
        if not np.all(np.isfinite(support)):
            self._add(InvariantRule.SUPPORT_FINITE, "support contains non-finite values", aid)
            return
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            self._add(InvariantRule.PROBS_NON_NEGATIVE, "probs contain negative or non-finite values", aid)
        total = float(probs.sum())
        if abs(total - 1.0) > PROBABILITY_SUM_TOLERANCE:
            self._add(InvariantRule.PROBS_SUM, f"probs sum to {total!r}, not 1", aid)
        if np.any(np.diff(support) <= 0):
            self._add(InvariantRule.SUPPORT_INCREASING, "support is not strictly increasing", aid)
        mean = float(np.dot(support, probs))
        if abs(mean - mu) > TOWER_TOLERANCE:
            self._add(InvariantRule.ITERATED_EXPECTATIONS,
                      f"posterior mean {mean!r} differs from mu {mu!r}", aid)

    def _check_constraints(self) -> None:
        inst = self.instance
        if len(inst.constraints) > inst.num_groups:
            self._add(InvariantRule.CONSTRAINT_COUNT,
                      f"{len(inst.constraints)} constraints for {inst.num_groups} groups")
        exact_groups = set()
        for constraint in inst.constraints:
            if not (0 <= constraint.group < inst.num_groups):
                self._add(InvariantRule.CONSTRAINT_GROUP, f"constraint group {constraint.group} out of range")
            if not math.isfinite(constraint.target):
                self._add(InvariantRule.CONSTRAINT_TARGET, f"constraint target {constraint.target} is not finite")
            if constraint.mode is ConstraintMode.EXACTLY:
                if constraint.group in exact_groups:
                    self._add(InvariantRule.EXACT_PER_GROUP,
                              f"group {constraint.group} has more than one exactly constraint")
                exact_groups.add(constraint.group)


def validate_instance(instance: ProblemInstance) -> List[Violation]:
    """Validate a problem instance.

    Args:
        instance: Instance to check

    Returns:
        List[Violation]: Violations found, empty iff all invariants hold
    """
    return InstanceValidator(instance).run()
