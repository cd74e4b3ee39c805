import math
import logging
import itertools
from dataclasses import dataclass
from multiprocessing import Pool
from typing import Dict, List, Optional, Sequence, Tuple, TYPE_CHECKING

import numpy as np
from tqdm import tqdm

from lib.coefficients import CoefficientTable, build_tables, compare_to_threshold
from lib.config import get_settings
from lib.errors import StructuralError, SweepSizeError
from lib.model import (
    ConstraintMode,
    ProblemInstance,
    ScreeningPolicy,
    ThresholdPolicy,
)

if TYPE_CHECKING:
    from lib.optimizer import SweepConfig

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9
DEFAULT_P_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)
DEFAULT_CHUNK_SIZE = 10_000


@dataclass(frozen=True)
class EvalReport:
    """Expected utility and cost of a policy pair.

    Monte Carlo reports carry standard errors and a positive ``draws``;
    exact reports have ``draws == 0``.
    """
    expected_utility: float
    expected_cost: float
    group_utilities: Tuple[float, ...]
    std_error_utility: float = 0.0
    std_error_cost: float = 0.0
    draws: int = 0

    @property
    def is_monte_carlo(self) -> bool:
        return self.draws > 0


def check_policy_shape(instance: ProblemInstance, screening: ScreeningPolicy, policy: ThresholdPolicy) -> np.ndarray:
    """Check a policy pair against an instance and return the screening vector.

    Raises:
        StructuralError: On length mismatch, probabilities outside [0, 1] or
            screening an applicant that has no posterior
    """
    if len(screening) != instance.n:
        raise StructuralError(f"screening policy has {len(screening)} entries, instance has {instance.n} applicants")
    if policy.num_groups != instance.num_groups or len(policy.boundary_probs) != instance.num_groups:
        raise StructuralError(f"threshold policy covers {policy.num_groups} groups, instance has {instance.num_groups}")
    p = screening.as_array()
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise StructuralError("screening probabilities must lie in [0, 1]")
    alphas = np.asarray(policy.boundary_probs)
    if np.any((alphas < 0) | (alphas > 1)):
        raise StructuralError("boundary probabilities must lie in [0, 1]")
    for a, prob in zip(instance.applicants, p):
        if prob > 0 and a.posterior is None:
            raise StructuralError(f"applicant {a.id} cannot be screened but has p = {prob}")
    return p


def _group_totals(table: CoefficientTable, threshold: float, alpha: float, p: np.ndarray) -> Tuple[float, float]:
    q, qe, o = table.parts(threshold).at(alpha)
    utility = qe * p + o * table.mu * (1.0 - p)
    cost = table.screen_cost * p + table.alloc_cost * q * p + table.alloc_cost * o * (1.0 - p)
    return float(utility.sum()), float(cost.sum())


def exact_evaluate(instance: ProblemInstance, screening: ScreeningPolicy, policy: ThresholdPolicy,
                   tables: Optional[List[CoefficientTable]] = None) -> EvalReport:
    """Closed-form expected utility and cost of a policy pair.

    Args:
        instance: Problem instance
        screening: Per-applicant screening probabilities
        policy: Per-group thresholds and boundary probabilities
        tables: Prebuilt coefficient tables, one per group

    Returns:
        EvalReport: Exact expectations with per-group utilities
    """
    p = check_policy_shape(instance, screening, policy)
    tables = tables or build_tables(instance)
    utilities = []
    total_cost = 0.0
    for j, table in enumerate(tables):
        utility, cost = _group_totals(table, policy.thresholds[j], policy.boundary_probs[j], p[table.positions])
        utilities.append(utility)
        total_cost += cost
    return EvalReport(float(sum(utilities)), total_cost, tuple(utilities))


class _ChunkStats:
    """Running count, mean and centred sum of squares for merged samples."""

    def __init__(self, count: int, mean: np.ndarray, m2: np.ndarray):
        self.count = count
        self.mean = mean
        self.m2 = m2

    @classmethod
    def of(cls, samples: np.ndarray) -> "_ChunkStats":
        mean = samples.mean(axis=0)
        return cls(samples.shape[0], mean, ((samples - mean) ** 2).sum(axis=0))

    def merge(self, other: "_ChunkStats") -> "_ChunkStats":
        if self.count == 0:
            return other
        total = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / total)
        m2 = self.m2 + other.m2 + delta * delta * (self.count * other.count / total)
        return _ChunkStats(total, mean, m2)


def _simulate_chunk(args) -> _ChunkStats:
    instance, p, policy, seed, index, size = args
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))
    n = instance.n
    screened = rng.random((size, n)) < p
    posterior_draws = rng.random((size, n))
    boundary_draws = rng.random((size, n))

    estimate = np.empty((size, n))
    allocated = np.zeros((size, n), dtype=bool)
    alloc_cost = np.array([a.alloc_cost for a in instance.applicants], dtype=float)
    screen_cost = np.array([a.screen_cost for a in instance.applicants], dtype=float)
    for i, a in enumerate(instance.applicants):
        column = np.full(size, a.mu)
        if a.posterior is not None:
            support, probs = a.posterior.as_arrays()
            idx = np.searchsorted(np.cumsum(probs), posterior_draws[:, i], side="right")
            column = np.where(screened[:, i], support[np.minimum(idx, len(support) - 1)], column)
        estimate[:, i] = column
        above, at = compare_to_threshold(column, a.alloc_cost, policy.thresholds[a.group])
        allocated[:, i] = above | (at & (boundary_draws[:, i] < policy.boundary_probs[a.group]))

    gained = estimate * allocated
    columns = [gained.sum(axis=1), (screened * screen_cost + allocated * alloc_cost).sum(axis=1)]
    groups = np.array([a.group for a in instance.applicants])
    for j in range(instance.num_groups):
        columns.append(gained[:, groups == j].sum(axis=1))
    return _ChunkStats.of(np.column_stack(columns))


def monte_carlo_evaluate(instance: ProblemInstance, screening: ScreeningPolicy, policy: ThresholdPolicy,
                         draws: int, seed: int, workers: int = 1, chunk_size: int = DEFAULT_CHUNK_SIZE,
                         progress: bool = False) -> EvalReport:
    """Simulate the screen-then-allocate process and average the outcomes.

    Draws are cut into fixed-size chunks; chunk k uses a PCG64 stream seeded
    by ``SeedSequence([seed, k])`` and chunks are merged in order, so the
    estimate does not depend on ``workers``.

    Args:
        instance: Problem instance
        screening: Per-applicant screening probabilities
        policy: Threshold policy
        draws: Number of simulated rounds (at least 1)
        seed: Non-negative integer seed
        workers: Process count for chunk simulation
        chunk_size: Draws per chunk
        progress: Show a progress bar

    Returns:
        EvalReport: Means with standard errors
    """
    if draws < 1:
        raise StructuralError(f"draws must be at least 1, got {draws}")
    p = check_policy_shape(instance, screening, policy)
    sizes = [min(chunk_size, draws - start) for start in range(0, draws, chunk_size)]
    jobs = [(instance, p, policy, seed, k, size) for k, size in enumerate(sizes)]

    try:
        if workers > 1 and len(jobs) > 1:
            with Pool(workers) as pool:
                chunks = list(tqdm(pool.imap(_simulate_chunk, jobs), total=len(jobs), disable=not progress))
        else:
            chunks = [_simulate_chunk(job) for job in tqdm(jobs, disable=not progress)]
    except Exception as e:
        logger.error(f"Failed to simulate policy: {e}")
        raise

    stats = _ChunkStats(0, np.zeros(2 + instance.num_groups), np.zeros(2 + instance.num_groups))
    for chunk in chunks:
        stats = stats.merge(chunk)
    if draws > 1:
        std_error = np.sqrt(stats.m2[:2] / (draws - 1)) / math.sqrt(draws)
    else:
        std_error = np.zeros(2)
    logger.info(f"Simulated {draws} rounds in {len(jobs)} chunks: utility {stats.mean[0]:.6f} ± {std_error[0]:.6f}")
    return EvalReport(
        expected_utility=float(stats.mean[0]),
        expected_cost=float(stats.mean[1]),
        group_utilities=tuple(float(v) for v in stats.mean[2:]),
        std_error_utility=float(std_error[0]),
        std_error_cost=float(std_error[1]),
        draws=draws,
    )


@dataclass(frozen=True)
class OracleResult:
    """Best policy pair found by exhaustive search, or none when infeasible."""
    report: Optional[EvalReport]
    screening: Optional[ScreeningPolicy]
    allocation: Optional[ThresholdPolicy]
    evaluations: int

    @property
    def feasible(self) -> bool:
        return self.report is not None


def _group_options(candidates: Sequence[float], alpha_grid: Sequence[float]) -> List[Tuple[float, float]]:
    options = []
    for t in candidates:
        if math.isinf(t):
            options.append((t, 0.0))
        else:
            options.extend((t, float(a)) for a in alpha_grid)
    return options


def oracle_grid_search(instance: ProblemInstance, p_grid: Sequence[float] = DEFAULT_P_GRID,
                       config: Optional["SweepConfig"] = None, cap: Optional[int] = None) -> OracleResult:
    """Exhaustive search over gridded screening vectors and threshold policies.

    Every screening vector of a threshold combination is evaluated at once
    as one matrix product.

    Args:
        instance: A small problem instance
        p_grid: Screening probabilities tried for each screenable applicant
        config: Supplies the α grid and threshold candidates
        cap: Maximum number of evaluations (default: SCREENING_ORACLE_CAP)

    Returns:
        OracleResult: Best feasible pair within 1e-9 tolerances

    Raises:
        SweepSizeError: If the search exceeds ``cap`` evaluations
    """
    from lib.optimizer import SweepConfig, threshold_candidates

    config = config or SweepConfig()
    cap = get_settings().oracle_cap if cap is None else cap
    screenable = [i for i, a in enumerate(instance.applicants) if a.screenable]
    per_group = []
    for j in range(instance.num_groups):
        candidates = config.candidates_for(j) or threshold_candidates(instance, j)
        per_group.append(_group_options(candidates, config.alpha_grid))
    combos = math.prod(len(options) for options in per_group)
    grid_size = len(p_grid) ** len(screenable)
    if combos * grid_size > cap:
        raise SweepSizeError(f"oracle search needs {combos * grid_size} evaluations, cap is {cap}")

    P = np.array(list(itertools.product(p_grid, repeat=len(screenable))), dtype=float).reshape(grid_size, -1)
    tables = build_tables(instance)
    groups = np.array([a.group for a in instance.applicants])
    screen_group = groups[screenable]
    best_value, best = -math.inf, None

    for combo in itertools.product(*per_group):
        group_u0 = np.zeros(instance.num_groups)
        du = np.zeros(instance.n)
        cost0 = 0.0
        dc = np.zeros(instance.n)
        for j, (table, (t, alpha)) in enumerate(zip(tables, combo)):
            q, qe, o = table.parts(t).at(alpha)
            pos = table.positions
            base_u = o * table.mu
            base_c = table.alloc_cost * o
            group_u0[j] = base_u.sum()
            cost0 += base_c.sum()
            du[pos] = qe - base_u
            dc[pos] = table.screen_cost + table.alloc_cost * q - base_c
        cost = cost0 + P @ dc[screenable]
        feasible = cost <= instance.budget + FEASIBILITY_TOL
        group_utilities = np.tile(group_u0, (grid_size, 1))
        for j in range(instance.num_groups):
            mask = screen_group == j
            group_utilities[:, j] += P[:, mask] @ du[screenable][mask]
        for constraint in instance.constraints:
            g = group_utilities[:, constraint.group]
            if constraint.mode is ConstraintMode.EXACTLY:
                feasible &= np.abs(g - constraint.target) <= FEASIBILITY_TOL
            else:
                feasible &= g >= constraint.target - FEASIBILITY_TOL
        if not feasible.any():
            continue
        utility = group_utilities.sum(axis=1)
        k = int(np.argmax(np.where(feasible, utility, -np.inf)))
        if utility[k] > best_value + 1e-12:
            best_value = float(utility[k])
            best = (combo, P[k].copy(), float(cost[k]), group_utilities[k].copy())

    evaluations = combos * grid_size
    if best is None:
        logger.info(f"Oracle found no feasible policy in {evaluations} evaluations")
        return OracleResult(None, None, None, evaluations)
    combo, p_row, cost, group_utilities = best
    p = np.zeros(instance.n)
    p[screenable] = p_row
    allocation = ThresholdPolicy(tuple(t for t, _ in combo), tuple(a for _, a in combo))
    report = EvalReport(best_value, cost, tuple(float(u) for u in group_utilities))
    logger.info(f"Oracle best utility {best_value:.6f} after {evaluations} evaluations")
    return OracleResult(report, ScreeningPolicy(tuple(p)), allocation, evaluations)


def _outcome_table(instance: ProblemInstance, p: np.ndarray, positions: Sequence[int]) -> Dict[str, np.ndarray]:
    values, weights, costs = [], [], []
    for i in positions:
        a = instance.applicants[i]
        values.append(a.mu)
        weights.append(1.0 - p[i])
        costs.append(a.alloc_cost)
        if a.posterior is not None and p[i] > 0:
            support, probs = a.posterior.as_arrays()
            values.extend(support)
            weights.extend(p[i] * probs)
            costs.extend([a.alloc_cost] * len(support))
    return {
        "value": np.asarray(values, dtype=float),
        "weight": np.asarray(weights, dtype=float),
        "cost": np.asarray(costs, dtype=float),
    }


def check_threshold_dominance(instance: ProblemInstance, screening: ScreeningPolicy, policy: ThresholdPolicy,
                              trials: int, seed: int) -> int:
    """Count random allocation rules that beat a positive-threshold policy.

    For each group with threshold t > 0 the post-screening outcomes (the
    unscreened point and every posterior atom) are tabulated. Random
    alternative allocation tables, half dense and half sparse, are scaled
    down to the policy's expected allocation cost when they exceed it. An
    alternative counts when its cost is within 1e-9 of the policy's and its
    utility exceeds the policy's by more than 1e-9.

    Args:
        instance: Problem instance
        screening: Screening policy held fixed
        policy: Threshold policy under test
        trials: Alternatives drawn per group
        seed: Seed for the alternatives

    Returns:
        int: Number of dominating alternatives (zero when the policy is optimal
            for its own cost)
    """
    p = check_policy_shape(instance, screening, policy)
    rng = np.random.default_rng(seed)
    violations = 0
    for j in range(instance.num_groups):
        t = policy.thresholds[j]
        if not t > 0:
            logger.warning(f"Skipping group {j}: threshold {t} is not positive")
            continue
        positions = instance.group_members(j)
        if not positions:
            continue
        table = _outcome_table(instance, p, positions)
        above, at = compare_to_threshold(table["value"], table["cost"], t)
        own = above + at * policy.boundary_probs[j]
        unit_utility = table["weight"] * table["value"]
        unit_cost = table["weight"] * table["cost"]
        policy_utility = float(own @ unit_utility)
        policy_cost = float(own @ unit_cost)

        dense = rng.random((trials - trials // 2, len(own)))
        sparse = rng.random((trials // 2, len(own))) * (rng.random((trials // 2, len(own))) < 0.2)
        alternatives = np.vstack([dense, sparse])
        costs = alternatives @ unit_cost
        scale = np.where(costs > policy_cost, policy_cost / np.where(costs > 0, costs, 1.0), 1.0)
        alternatives = alternatives * scale[:, None]
        costs = alternatives @ unit_cost
        utilities = alternatives @ unit_utility
        beaten = (costs <= policy_cost + FEASIBILITY_TOL) & (utilities > policy_utility + FEASIBILITY_TOL)
        count = int(beaten.sum())
        if count:
            logger.warning(f"Group {j}: {count} of {trials} alternatives dominate threshold {t}")
        violations += count
    return violations
