import math
import logging
import itertools
from dataclasses import dataclass, field, replace
from multiprocessing import Pool
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from lib.coefficients import CoefficientParts, CoefficientTable, build_tables
from lib.errors import StructuralError, SweepSizeError, TargetRangeError
from lib.evaluator import exact_evaluate
from lib.linprog import LinearProgram, SimplexOptions, solve_lp
from lib.model import (
    Applicant,
    ConstraintMode,
    DiversityConstraint,
    ProblemInstance,
    ScreeningPolicy,
    SolveResult,
    SolveStatus,
    ThresholdPolicy,
)

logger = logging.getLogger(__name__)

IMPROVEMENT_TOL = 1e-9
AGREEMENT_TOL = 1e-6
CALIBRATION_SLACK = 1e-12
DEFAULT_SWEEP_CAP = 1_000_000


def alpha_grid_from_step(step: float) -> Tuple[float, ...]:
    """Evenly spaced boundary probabilities 0, step, ..., 1."""
    if not 0 < step <= 1:
        raise StructuralError(f"alpha step must lie in (0, 1], got {step}")
    count = int(round(1.0 / step))
    return tuple(float(a) for a in np.linspace(0.0, 1.0, count + 1))


@dataclass(frozen=True)
class SweepConfig:
    """Search space of the threshold sweep.

    Attributes:
        alpha_grid: Boundary probabilities tried at each finite threshold
        lambda_grid: Targeted-group utilities for frontier sweeps
        threshold_candidates: Explicit per-group candidate lists
        max_candidates: Thin larger candidate sets to this many order statistics
        use_joint_lp: Use the joint screening/allocation program when it applies
        relax_pointmass_alpha: Solve α of unscreenable groups inside the LP
        cap: Largest number of LP solves a sweep may need
        simplex: Options passed to the LP solver
    """
    alpha_grid: Tuple[float, ...] = alpha_grid_from_step(0.05)
    lambda_grid: Tuple[float, ...] = ()
    threshold_candidates: Optional[Dict[int, Tuple[float, ...]]] = None
    max_candidates: Optional[int] = None
    use_joint_lp: bool = True
    relax_pointmass_alpha: bool = True
    cap: int = DEFAULT_SWEEP_CAP
    simplex: SimplexOptions = field(default_factory=SimplexOptions)

    def __post_init__(self):
        object.__setattr__(self, "alpha_grid", tuple(float(a) for a in self.alpha_grid))
        object.__setattr__(self, "lambda_grid", tuple(float(v) for v in self.lambda_grid))
        if not self.alpha_grid:
            raise StructuralError("alpha grid must not be empty")
        if any(a < 0 or a > 1 for a in self.alpha_grid):
            raise StructuralError("alpha grid values must lie in [0, 1]")
        for name, grid in (("alpha", self.alpha_grid), ("lambda", self.lambda_grid)):
            if list(grid) != sorted(grid):
                raise StructuralError(f"{name} grid must be sorted ascending")
        if self.max_candidates is not None and self.max_candidates < 2:
            raise StructuralError("max_candidates must be at least 2")

    def candidates_for(self, group: int) -> Optional[List[float]]:
        if self.threshold_candidates and group in self.threshold_candidates:
            return sorted(float(t) for t in self.threshold_candidates[group])
        return None


def frontier_constraints(num_groups: int, lambda_target: float) -> List[DiversityConstraint]:
    """Exact target on group 0 and a zero floor on every other group."""
    return [DiversityConstraint(0, lambda_target, ConstraintMode.EXACTLY)] + [
        DiversityConstraint(j, 0.0, ConstraintMode.AT_LEAST) for j in range(1, num_groups)
    ]


class _ProgramBuilder:
    """Accumulates variable blocks of a screening program.

    Each block contributes objective, budget and one group-utility
    coefficient per variable; constants of the fixed parts are tracked apart.
    """

    def __init__(self, instance: ProblemInstance):
        self.instance = instance
        self.objective: List[np.ndarray] = []
        self.budget: List[np.ndarray] = []
        self.group_rows: List[List[np.ndarray]] = [[] for _ in range(instance.num_groups)]
        self.bounds: List[np.ndarray] = []
        self.labels: List[str] = []
        self.objective_constant = 0.0
        self.budget_constant = 0.0
        self.group_constants = np.zeros(instance.num_groups)

    def add_constant(self, group: int, utility: float, cost: float) -> None:
        self.objective_constant += utility
        self.budget_constant += cost
        self.group_constants[group] += utility

    def add_block(self, group: int, labels: Sequence[str], objective: np.ndarray, budget: np.ndarray,
                  upper: np.ndarray) -> None:
        size = len(labels)
        self.labels.extend(labels)
        self.objective.append(np.asarray(objective, dtype=float))
        self.budget.append(np.asarray(budget, dtype=float))
        for j in range(self.instance.num_groups):
            self.group_rows[j].append(np.asarray(objective, dtype=float) if j == group else np.zeros(size))
        self.bounds.append(np.column_stack([np.zeros(size), np.asarray(upper, dtype=float)]))

    def build(self) -> LinearProgram:
        instance = self.instance
        concat = lambda parts: np.concatenate(parts) if parts else np.zeros(0)
        ineq = [(concat(self.budget), instance.budget - self.budget_constant)]
        eq = []
        for constraint in instance.constraints:
            if not 0 <= constraint.group < instance.num_groups:
                raise StructuralError(f"constraint group {constraint.group} outside [0, {instance.num_groups})")
            row = concat(self.group_rows[constraint.group])
            rhs = constraint.target - self.group_constants[constraint.group]
            if constraint.mode is ConstraintMode.EXACTLY:
                eq.append((row, rhs))
            else:
                ineq.append((-row, -rhs))
        bounds = np.vstack(self.bounds) if self.bounds else np.zeros((0, 2))
        return LinearProgram(
            objective=concat(self.objective),
            ineq=ineq,
            eq=eq,
            bounds=bounds,
            metadata={
                "objective_constant": self.objective_constant,
                "budget_constant": self.budget_constant,
                "group_constants": self.group_constants.copy(),
                "labels": list(self.labels),
            },
        )


def _add_screening_block(builder: _ProgramBuilder, table: CoefficientTable, parts: CoefficientParts,
                         alpha: float, instance: ProblemInstance) -> None:
    q, qe, o = parts.at(alpha)
    fixed_u = o * table.mu
    fixed_c = table.alloc_cost * o
    builder.add_constant(table.group, float(fixed_u.sum()), float(fixed_c.sum()))
    builder.add_block(
        table.group,
        [f"p[{instance.applicants[i].id}]" for i in table.positions],
        objective=qe - fixed_u,
        budget=table.screen_cost + table.alloc_cost * q - fixed_c,
        upper=table.screenable.astype(float),
    )


def _add_alpha_block(builder: _ProgramBuilder, table: CoefficientTable, parts: CoefficientParts) -> None:
    # unscreenable group: utility and cost are affine in α with p fixed at 0
    builder.add_block(
        table.group,
        [f"alpha[{table.group}]"],
        objective=np.array([float((parts.o_atom * table.mu).sum())]),
        budget=np.array([float((parts.o_atom * table.alloc_cost).sum())]),
        upper=np.ones(1),
    )


def build_screening_lp(instance: ProblemInstance, policy: ThresholdPolicy, free_alpha_groups: Sequence[int] = (),
                       tables: Optional[List[CoefficientTable]] = None,
                       parts: Optional[List[CoefficientParts]] = None) -> LinearProgram:
    """Screening program induced by a fixed threshold policy.

    Variables are p_i for every applicant in pool order (bounds [0, 0] for
    applicants without a posterior), followed by one α variable per group in
    ``free_alpha_groups``. Groups listed there must be unscreenable; their
    policy boundary probability is ignored.

    Args:
        instance: Problem instance
        policy: Threshold policy with one entry per group
        free_alpha_groups: Unscreenable groups whose α is an LP variable
        tables: Prebuilt coefficient tables
        parts: Precomputed coefficient parts per group at the policy thresholds

    Returns:
        LinearProgram: Objective, budget row and one row per constraint.
            ``metadata`` holds the objective and budget constants.
    """
    if policy.num_groups != instance.num_groups:
        raise StructuralError(f"policy has {policy.num_groups} groups, instance has {instance.num_groups}")
    for a in instance.applicants:
        if not 0 <= a.group < instance.num_groups:
            raise StructuralError(f"applicant {a.id} has group {a.group} outside [0, {instance.num_groups})")
    for j in free_alpha_groups:
        if not instance.is_pointmass_group(j):
            raise StructuralError(f"group {j} has screenable applicants, its α cannot be relaxed")
    tables = tables or build_tables(instance)
    parts = parts if parts is not None else [t.parts(policy.thresholds[j]) for j, t in enumerate(tables)]
    builder = _ProgramBuilder(instance)
    for j, table in enumerate(tables):
        alpha = 0.0 if j in free_alpha_groups else policy.boundary_probs[j]
        _add_screening_block(builder, table, parts[j], alpha, instance)
    for j in sorted(free_alpha_groups):
        _add_alpha_block(builder, tables[j], parts[j])
    order = np.concatenate([np.asarray(t.positions, dtype=int) for t in tables] + [np.zeros(0, dtype=int)])
    return _pool_order(builder.build(), order)


def _pool_order(lp: LinearProgram, order: np.ndarray) -> LinearProgram:
    """Permute the leading p block (built group by group) into pool order."""
    n = len(order)
    index = np.concatenate([np.argsort(order, kind="stable"), np.arange(n, lp.num_variables)]).astype(int)
    metadata = dict(lp.metadata)
    metadata["labels"] = [lp.metadata["labels"][k] for k in index]
    return LinearProgram(
        objective=np.asarray(lp.objective)[index],
        ineq=[(np.asarray(row)[index], rhs) for row, rhs in lp.ineq],
        eq=[(np.asarray(row)[index], rhs) for row, rhs in lp.eq],
        bounds=np.asarray(lp.bounds)[index],
        metadata=metadata,
    )


def joint_lp_applicable(instance: ProblemInstance) -> bool:
    return instance.num_groups == 2 and instance.is_pointmass_group(1)


def build_joint_lp(instance: ProblemInstance, policy_g1: Tuple[float, float],
                   tables: Optional[List[CoefficientTable]] = None,
                   parts: Optional[CoefficientParts] = None, free_alpha: bool = False) -> LinearProgram:
    """Joint program over group-0 screening and group-1 allocation.

    Group 1 must be unscreenable. Its members get allocation variables
    a_i ∈ [0, 1] with objective μ_i and budget coefficient c_i, so no group-1
    threshold has to be enumerated.

    Args:
        instance: Two-group instance
        policy_g1: (threshold, boundary probability) of group 0
        tables: Prebuilt coefficient tables
        parts: Precomputed group-0 coefficient parts at the threshold
        free_alpha: Make group 0's α a variable (group 0 must be unscreenable)

    Returns:
        LinearProgram: Variables p (group 0, pool order), α if free, then a (group 1)
    """
    if not joint_lp_applicable(instance):
        raise StructuralError("joint program needs exactly two groups with an unscreenable second group")
    if free_alpha and not instance.is_pointmass_group(0):
        raise StructuralError("group 0 has screenable applicants, its α cannot be relaxed")
    threshold, alpha = policy_g1
    tables = tables or build_tables(instance)
    builder = _ProgramBuilder(instance)
    group_parts = parts if parts is not None else tables[0].parts(threshold)
    _add_screening_block(builder, tables[0], group_parts, 0.0 if free_alpha else alpha, instance)
    if free_alpha:
        _add_alpha_block(builder, tables[0], group_parts)
    other = tables[1]
    builder.add_block(
        1, [f"a[{instance.applicants[i].id}]" for i in other.positions],
        objective=other.mu,
        budget=other.alloc_cost,
        upper=np.ones(len(other)),
    )
    return builder.build()


def threshold_candidates(instance: ProblemInstance, group: int) -> List[float]:
    """Sorted thresholds at which the group's coefficients can change.

    Args:
        instance: Problem instance
        group: Group index

    Returns:
        List[float]: -inf, every cost-normalised support point and mean, +inf
    """
    values = CoefficientTable(instance, group).candidate_values()
    finite = np.unique(values[np.isfinite(values)])
    return [-math.inf] + [float(v) for v in finite] + [math.inf]


def thin_candidates(candidates: Sequence[float], limit: Optional[int]) -> List[float]:
    """Keep ±inf and evenly spaced order statistics of the finite candidates."""
    candidates = list(candidates)
    if limit is None or len(candidates) <= limit:
        return candidates
    finite = [t for t in candidates if math.isfinite(t)]
    keep = max(limit - 2, 1)
    picks = np.unique(np.round(np.linspace(0, len(finite) - 1, keep)).astype(int))
    return [-math.inf] + [finite[k] for k in picks] + [math.inf]


def _calibration_table(applicants: Sequence[Applicant]) -> Tuple[ProblemInstance, CoefficientTable]:
    pool = ProblemInstance(tuple(replace(a, group=0) for a in applicants), num_groups=1, budget=0.0)
    return pool, CoefficientTable(pool, 0)


def calibrate_threshold(applicants: Sequence[Applicant], screening: ScreeningPolicy, target: float,
                        kind: str = "utility") -> Tuple[float, float]:
    """Find the threshold policy of a sub-pool that hits a target exactly.

    ``kind="utility"`` matches expected allocated utility;
    ``kind="cost"`` matches expected allocation cost (screening spend is
    independent of the threshold and excluded). Candidates are scanned from
    +inf downward; the first t with value(t, α=1) ≥ target is kept and α
    solves value(t, α) = target.

    Args:
        applicants: The sub-pool, treated as one group
        screening: Screening probabilities of the sub-pool
        target: Utility or cost to reach
        kind: ``utility`` or ``cost``

    Returns:
        Tuple[float, float]: (threshold, boundary probability)

    Raises:
        TargetRangeError: If no threshold policy reaches the target
    """
    if kind not in ("utility", "cost"):
        raise StructuralError(f"unknown calibration kind {kind!r}")
    if len(screening) != len(applicants):
        raise StructuralError(f"screening has {len(screening)} entries for {len(applicants)} applicants")
    if not math.isfinite(target) or target < 0:
        raise TargetRangeError(f"{kind} target {target} is not achievable")
    if target == 0:
        return math.inf, 0.0

    pool, table = _calibration_table(applicants)
    p = screening.as_array()

    def value(parts: CoefficientParts, alpha: float) -> float:
        q, qe, o = parts.at(alpha)
        if kind == "utility":
            return float((qe * p + o * table.mu * (1.0 - p)).sum())
        return float((table.alloc_cost * (q * p + o * (1.0 - p))).sum())

    best_t, best_full = math.inf, 0.0
    for t in reversed(threshold_candidates(pool, 0)):
        parts = table.parts(t)
        full = value(parts, 1.0)
        if full >= target:
            strict = value(parts, 0.0)
            atom = full - strict
            if atom <= 0:
                return t, 1.0
            return t, float(min(1.0, max(0.0, (target - strict) / atom)))
        if full > best_full:
            best_t, best_full = t, full
    # rounding slack on the largest reachable value
    if best_full >= target - CALIBRATION_SLACK * max(1.0, abs(target)):
        return best_t, 1.0
    raise TargetRangeError(f"{kind} target {target} exceeds every threshold policy of the pool")


class ThresholdSweep:
    """Solves one screening program per threshold policy and keeps the best.

    Threshold combinations are visited in lexicographic ascending order of
    (t, α) per group; a later policy replaces the incumbent only when it is
    better by more than 1e-9.
    """

    def __init__(self, instance: ProblemInstance, config: SweepConfig):
        self.instance = instance
        self.config = config
        self.tables = build_tables(instance)
        self.joint = config.use_joint_lp and joint_lp_applicable(instance)
        self.enumerated = [0] if self.joint else list(range(instance.num_groups))
        self.free_alpha = tuple(
            j for j in self.enumerated
            if config.relax_pointmass_alpha and instance.is_pointmass_group(j)
        )
        self._parts: Dict[Tuple[int, float], CoefficientParts] = {}
        self.lp_solves = 0

    def parts(self, group: int, threshold: float) -> CoefficientParts:
        key = (group, threshold)
        if key not in self._parts:
            self._parts[key] = self.tables[group].parts(threshold)
        return self._parts[key]

    def candidates(self, group: int) -> List[float]:
        candidates = self.config.candidates_for(group) or threshold_candidates(self.instance, group)
        return thin_candidates(candidates, self.config.max_candidates)

    def _exact_anchors(self, group: int, threshold: float) -> List[float]:
        anchors = []
        table = self.tables[group]
        parts = self.parts(group, threshold)
        strict = float((parts.o_strict * table.mu).sum())
        atom = float((parts.o_atom * table.mu).sum())
        for constraint in self.instance.constraints_for(group):
            if constraint.mode is ConstraintMode.EXACTLY and atom != 0:
                alpha = (constraint.target - strict) / atom
                if 0.0 <= alpha <= 1.0:
                    anchors.append(float(alpha))
        return anchors

    def options(self, group: int) -> List[Tuple[float, float]]:
        options = []
        for t in self.candidates(group):
            if math.isinf(t) or group in self.free_alpha:
                options.append((t, 0.0))
            else:
                alphas = sorted(set(self.config.alpha_grid) | set(self._exact_anchors(group, t)))
                options.extend((t, a) for a in alphas)
        return options

    def size(self) -> int:
        return math.prod(len(self.options(j)) for j in self.enumerated)

    def _program(self, combo: Sequence[Tuple[float, float]]) -> LinearProgram:
        if self.joint:
            t, alpha = combo[0]
            return build_joint_lp(self.instance, (t, alpha), self.tables, self.parts(0, t), 0 in self.free_alpha)
        policy = ThresholdPolicy(tuple(t for t, _ in combo), tuple(a for _, a in combo))
        parts = [self.parts(j, t) for j, (t, _) in enumerate(combo)]
        return build_screening_lp(self.instance, policy, self.free_alpha, self.tables, parts)

    def run(self) -> SolveResult:
        """Sweep every threshold combination.

        Returns:
            SolveResult: Best policy pair, or an infeasible result

        Raises:
            SweepSizeError: If the sweep needs more LP solves than the cap
        """
        per_group = [self.options(j) for j in self.enumerated]
        total = math.prod(len(options) for options in per_group)
        if total > self.config.cap:
            raise SweepSizeError(f"sweep needs {total} LP solves, cap is {self.config.cap}")
        logger.info(f"Sweeping {total} threshold policies ({'joint' if self.joint else 'screening'} programs)")

        best_value, best = -math.inf, None
        for combo in itertools.product(*per_group):
            lp = self._program(combo)
            solution = solve_lp(lp, self.config.simplex)
            self.lp_solves += 1
            if not solution.is_optimal:
                continue
            value = solution.objective_value + lp.metadata["objective_constant"]
            if value > best_value + IMPROVEMENT_TOL:
                best_value, best = value, (combo, lp, solution)

        if best is None:
            logger.info(f"All {self.lp_solves} programs infeasible")
            return SolveResult.infeasible(self.instance, lp_solves=self.lp_solves)
        return self._result(*best)

    def _result(self, combo, lp: LinearProgram, solution) -> SolveResult:
        instance = self.instance
        x = solution.x
        lp_value = solution.objective_value + lp.metadata["objective_constant"]
        lp_cost = float(np.dot(lp.ineq[0][0], x)) + lp.metadata["budget_constant"]
        p = np.zeros(instance.n)
        thresholds = [math.inf] * instance.num_groups
        alphas = [0.0] * instance.num_groups
        if self.joint:
            members0 = self.tables[0].positions
            offset = len(members0)
            p[members0] = x[:offset]
            thresholds[0], alphas[0] = combo[0]
            if 0 in self.free_alpha:
                alphas[0] = float(x[offset])
                offset += 1
            allocation = x[offset:]
            thresholds[1], alphas[1] = self._calibrate_allocation(allocation)
        else:
            p = x[:instance.n].copy()
            for j, (t, alpha) in enumerate(combo):
                thresholds[j], alphas[j] = t, alpha
            for k, j in enumerate(self.free_alpha):
                alphas[j] = float(x[instance.n + k])
        p = np.clip(p, 0.0, 1.0)
        screening = ScreeningPolicy(tuple(float(v) for v in p))
        policy = ThresholdPolicy(tuple(thresholds), tuple(alphas))
        report = exact_evaluate(instance, screening, policy, self.tables)
        if abs(report.expected_utility - lp_value) > AGREEMENT_TOL or abs(report.expected_cost - lp_cost) > AGREEMENT_TOL:
            logger.warning(
                f"Evaluator disagrees with LP: utility {report.expected_utility:.9f} vs {lp_value:.9f}, "
                f"cost {report.expected_cost:.9f} vs {lp_cost:.9f}"
            )
        logger.info(f"Best policy after {self.lp_solves} programs: utility {report.expected_utility:.6f}")
        return SolveResult(
            screening=screening,
            allocation=policy,
            expected_utility=report.expected_utility,
            expected_cost=report.expected_cost,
            group_utilities=report.group_utilities,
            status=SolveStatus.OPTIMAL,
            lp_objective=lp_value,
            lp_cost=lp_cost,
            lp_solves=self.lp_solves,
        )

    def _calibrate_allocation(self, allocation: np.ndarray) -> Tuple[float, float]:
        """Threshold of the unscreenable group matching the joint program's allocation."""
        table = self.tables[1]
        members = [self.instance.applicants[i] for i in table.positions]
        if not members:
            return math.inf, 0.0
        exact = any(c.mode is ConstraintMode.EXACTLY for c in self.instance.constraints_for(1))
        if exact:
            kind = "utility"
            target = min(float(np.dot(table.mu, allocation)), float(np.clip(table.mu, 0.0, None).sum()))
        else:
            kind = "cost"
            target = min(float(np.dot(table.alloc_cost, allocation)), float(table.alloc_cost.sum()))
        if target <= CALIBRATION_SLACK * max(1.0, float(np.abs(table.mu).sum() + table.alloc_cost.sum())):
            target = 0.0
        try:
            return calibrate_threshold(members, ScreeningPolicy.zeros(len(members)), target, kind)
        except TargetRangeError as e:
            logger.error(f"Failed to calibrate unscreenable group to {kind} {target}: {e}")
            raise


def sweep_solve(instance: ProblemInstance, config: Optional[SweepConfig] = None) -> SolveResult:
    """Optimal screening and threshold policies by exhaustive threshold sweep.

    Args:
        instance: Valid problem instance
        config: Search space and solver options

    Returns:
        SolveResult: Best feasible pair, status infeasible when none exists
    """
    return ThresholdSweep(instance, config or SweepConfig()).run()


def _greedy_fill(instance: ProblemInstance, positions: Sequence[int], stop) -> np.ndarray:
    """Allocate in descending μ/c order (ties by id) until ``stop`` says how much to take.

    ``stop(applicant, taken_utility, taken_cost)`` returns the fraction in
    [0, 1] to allocate to the applicant, or None to end the pass.
    """
    order = sorted(positions, key=lambda i: (-instance.applicants[i].mu / instance.applicants[i].alloc_cost,
                                             instance.applicants[i].id))
    allocation = np.zeros(instance.n)
    utility = cost = 0.0
    for i in order:
        a = instance.applicants[i]
        if a.mu <= 0:
            break
        fraction = stop(a, utility, cost)
        if fraction is None or fraction <= 0:
            break
        allocation[i] = fraction
        utility += fraction * a.mu
        cost += fraction * a.alloc_cost
    return allocation


def no_screening_baseline(instance: ProblemInstance, lambda_target: float) -> SolveResult:
    """Best allocation without screening that gives group 0 exactly ``lambda_target``.

    Targeted applicants are funded in descending μ/c order until the target
    is met (the marginal applicant fractionally); the remaining budget goes
    to all other groups pooled, again by μ/c, never to μ ≤ 0 applicants.

    Args:
        instance: Instance whose group 0 is the targeted group
        lambda_target: Exact expected utility for group 0

    Returns:
        SolveResult: Threshold representation with zero screening, or an
            infeasible result when the target or budget cannot be met
    """
    if instance.num_groups < 1:
        raise StructuralError("instance has no groups")
    if not math.isfinite(lambda_target) or lambda_target < 0:
        return SolveResult.infeasible(instance, lambda_target=lambda_target)

    def until_target(a: Applicant, utility: float, cost: float) -> Optional[float]:
        remaining = lambda_target - utility
        if remaining <= 0:
            return None
        return min(1.0, remaining / a.mu)

    targeted = instance.group_members(0)
    allocation = _greedy_fill(instance, targeted, until_target)
    reached = float(sum(allocation[i] * instance.applicants[i].mu for i in targeted))
    spent = float(sum(allocation[i] * instance.applicants[i].alloc_cost for i in targeted))
    if reached < lambda_target - IMPROVEMENT_TOL or spent > instance.budget + IMPROVEMENT_TOL:
        logger.info(f"No-screening target {lambda_target} infeasible (reached {reached}, cost {spent})")
        return SolveResult.infeasible(instance, lambda_target=lambda_target)

    def until_budget(a: Applicant, utility: float, cost: float) -> Optional[float]:
        remaining = instance.budget - spent - cost
        if remaining <= 0:
            return None
        return min(1.0, remaining / a.alloc_cost)

    others = [i for i, a in enumerate(instance.applicants) if a.group != 0]
    allocation += _greedy_fill(instance, others, until_budget)

    thresholds, alphas = [], []
    for j in range(instance.num_groups):
        members = instance.group_members(j)
        pool = [instance.applicants[i] for i in members]
        zeros = ScreeningPolicy.zeros(len(pool))
        if j == 0:
            t, alpha = calibrate_threshold(pool, zeros, lambda_target, "utility")
        else:
            target = float(sum(allocation[i] * instance.applicants[i].alloc_cost for i in members))
            t, alpha = calibrate_threshold(pool, zeros, target, "cost")
        thresholds.append(t)
        alphas.append(alpha)
    screening = ScreeningPolicy.zeros(instance.n)
    policy = ThresholdPolicy(tuple(thresholds), tuple(alphas))
    report = exact_evaluate(instance, screening, policy)
    return SolveResult(
        screening=screening,
        allocation=policy,
        expected_utility=report.expected_utility,
        expected_cost=report.expected_cost,
        group_utilities=report.group_utilities,
        status=SolveStatus.OPTIMAL,
        lambda_target=lambda_target,
    )


def _frontier_point(args) -> SolveResult:
    instance, config, with_screening, lambda_target = args
    if with_screening:
        constrained = instance.with_constraints(frontier_constraints(instance.num_groups, lambda_target))
        result = sweep_solve(constrained, config)
    else:
        result = no_screening_baseline(instance, lambda_target)
    return replace(result, lambda_target=lambda_target)


def pareto_frontier(instance: ProblemInstance, config: SweepConfig, with_screening: bool = True,
                    workers: int = 1, progress: bool = False) -> List[Tuple[float, SolveResult]]:
    """Best total utility for each exact targeted-group utility on the λ grid.

    Args:
        instance: Instance whose group 0 is the targeted group
        config: Sweep settings; ``lambda_grid`` gives the targets
        with_screening: Sweep screening policies, or use the no-screening baseline
        workers: Process count for grid points
        progress: Show a progress bar

    Returns:
        List[Tuple[float, SolveResult]]: One entry per λ in grid order
    """
    jobs = [(instance, config, with_screening, lam) for lam in config.lambda_grid]
    label = "screening" if with_screening else "no-screening"
    try:
        if workers > 1 and len(jobs) > 1:
            with Pool(workers) as pool:
                results = list(tqdm(pool.imap(_frontier_point, jobs), total=len(jobs), desc=label, disable=not progress))
        else:
            results = [_frontier_point(job) for job in tqdm(jobs, desc=label, disable=not progress)]
    except Exception as e:
        logger.error(f"Failed to trace {label} frontier: {e}")
        raise
    for lam, result in zip(config.lambda_grid, results):
        if not result.is_optimal:
            logger.warning(f"{label} frontier infeasible at lambda {lam}")
    return list(zip(config.lambda_grid, results))
