import math
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from lib.errors import SolverError, StructuralError

logger = logging.getLogger(__name__)

Row = Tuple[Sequence[float], float]


class LpStatus(Enum):
    """Terminal status of a linear program."""
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class Pricing(Enum):
    """Entering-variable rule.

    DANTZIG takes the largest reduced cost and switches to Bland's rule while
    steps are degenerate. BLAND always takes the lowest eligible index.
    """
    DANTZIG = "dantzig"
    BLAND = "bland"


@dataclass(frozen=True)
class SimplexOptions:
    pricing: Pricing = Pricing.DANTZIG
    max_iterations: Optional[int] = None
    zero_tol: float = 1e-11
    optimality_tol: float = 1e-9
    feasibility_tol: float = 1e-9

    def __post_init__(self):
        if not isinstance(self.pricing, Pricing):
            object.__setattr__(self, "pricing", Pricing(self.pricing))


@dataclass
class LinearProgram:
    """Maximise objective·x subject to ineq rows (≤), eq rows (=) and bounds.

    ``bounds`` defaults to [0, 1] for every variable. Upper bounds may be
    ``inf``; lower bounds must be finite.
    """
    objective: Sequence[float]
    ineq: List[Row] = field(default_factory=list)
    eq: List[Row] = field(default_factory=list)
    bounds: Optional[Sequence[Tuple[float, float]]] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def num_variables(self) -> int:
        return len(self.objective)

    def bounds_array(self) -> np.ndarray:
        if self.bounds is None:
            return np.tile([0.0, 1.0], (self.num_variables, 1))
        return np.asarray(self.bounds, dtype=float).reshape(-1, 2)

    def check(self) -> None:
        """Raise StructuralError when dimensions or entries are malformed."""
        n = self.num_variables
        c = np.asarray(self.objective, dtype=float)
        if not np.all(np.isfinite(c)):
            raise StructuralError("objective contains non-finite entries")
        for kind, rows in (("inequality", self.ineq), ("equality", self.eq)):
            for k, (row, rhs) in enumerate(rows):
                row = np.asarray(row, dtype=float)
                if row.shape != (n,):
                    raise StructuralError(f"{kind} row {k} has length {row.size}, expected {n}")
                if not (np.all(np.isfinite(row)) and math.isfinite(rhs)):
                    raise StructuralError(f"{kind} row {k} contains non-finite entries")
        bounds = self.bounds_array()
        if bounds.shape != (n, 2):
            raise StructuralError(f"bounds have {bounds.shape[0]} entries, expected {n}")
        if not np.all(np.isfinite(bounds[:, 0])):
            raise StructuralError("lower bounds must be finite")
        if np.any(np.isnan(bounds[:, 1])) or np.any(bounds[:, 1] == -np.inf):
            raise StructuralError("upper bounds must be real or +inf")
        if np.any(bounds[:, 0] > bounds[:, 1]):
            raise StructuralError("some lower bound exceeds its upper bound")

    def row_values(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Left-hand sides of the inequality and equality rows at x."""
        ineq = np.array([np.dot(row, x) for row, _ in self.ineq], dtype=float)
        eq = np.array([np.dot(row, x) for row, _ in self.eq], dtype=float)
        return ineq, eq


@dataclass(frozen=True)
class LpSolution:
    x: np.ndarray
    objective_value: float
    status: LpStatus
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def _solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if matrix.size == 0:
        return np.zeros(0)
    return np.linalg.solve(matrix, rhs)


class BoundedSimplex:
    """Bounded-variable primal simplex on a dense tableau.

    Every row gets either a basic slack or an artificial variable so that
    the starting point (all structural variables at their lower bound) is
    basic feasible for the phase-one problem. A solver instance is used once.
    """

    def __init__(self, lp: LinearProgram, options: Optional[SimplexOptions] = None):
        lp.check()
        self.lp = lp
        self.options = options or SimplexOptions()
        self.iterations = 0
        self._setup()

    def _setup(self) -> None:
        lp = self.lp
        n = lp.num_variables
        m_ineq, m_eq = len(lp.ineq), len(lp.eq)
        m = m_ineq + m_eq
        bounds = lp.bounds_array()
        A = np.zeros((m, n))
        b = np.zeros(m)
        for i, (row, rhs) in enumerate(list(lp.ineq) + list(lp.eq)):
            A[i] = np.asarray(row, dtype=float)
            b[i] = float(rhs)
        residual = b - A @ bounds[:, 0]

        slack = np.zeros((m, m_ineq))
        slack[np.arange(m_ineq), np.arange(m_ineq)] = 1.0
        artificial_cols = []
        basis = []
        for i in range(m):
            if i < m_ineq and residual[i] >= 0:
                basis.append(n + i)
            else:
                col = np.zeros(m)
                col[i] = 1.0 if residual[i] >= 0 else -1.0
                basis.append(n + m_ineq + len(artificial_cols))
                artificial_cols.append(col)
        artificial = np.array(artificial_cols).T if artificial_cols else np.zeros((m, 0))

        self.n, self.m = n, m
        self.num_artificial = artificial.shape[1]
        self.M = np.hstack([A, slack, artificial])
        self.b = b
        total = self.M.shape[1]
        self.lo = np.concatenate([bounds[:, 0], np.zeros(m_ineq + self.num_artificial)])
        self.hi = np.concatenate([bounds[:, 1], np.full(m_ineq + self.num_artificial, np.inf)])
        self.x = self.lo.copy()
        self.at_upper = np.zeros(total, dtype=bool)
        self.basis = basis
        self.is_basic = np.zeros(total, dtype=bool)
        self.is_basic[basis] = True
        self.max_iterations = self.options.max_iterations or max(10_000, 50 * (total + m))

    def _refresh_basic(self, basis_matrix: np.ndarray) -> None:
        x_nonbasic = np.where(self.is_basic, 0.0, self.x)
        self.x[self.basis] = _solve(basis_matrix, self.b - self.M @ x_nonbasic)

    def _price(self, reduced: np.ndarray, use_bland: bool) -> Tuple[Optional[int], int]:
        tol = self.options.optimality_tol
        movable = ~self.is_basic & (self.hi - self.lo > self.options.zero_tol)
        up = movable & ~self.at_upper & (reduced > tol)
        down = movable & self.at_upper & (reduced < -tol)
        eligible = up | down
        if not eligible.any():
            return None, 0
        if use_bland or self.options.pricing is Pricing.BLAND:
            j = int(np.flatnonzero(eligible)[0])
        else:
            j = int(np.argmax(np.where(eligible, np.abs(reduced), -1.0)))
        return j, (1 if up[j] else -1)

    def _ratio_test(self, entering: int, delta: np.ndarray) -> Tuple[float, Optional[int], bool]:
        zero = self.options.zero_tol
        basis = np.asarray(self.basis, dtype=int)
        x_b, lo_b, hi_b = self.x[basis], self.lo[basis], self.hi[basis]
        limits = np.full(self.m, np.inf)
        dec = delta < -zero
        inc = delta > zero
        limits[dec] = (x_b[dec] - lo_b[dec]) / -delta[dec]
        with np.errstate(invalid="ignore"):
            limits[inc] = (hi_b[inc] - x_b[inc]) / delta[inc]
        limits = np.maximum(limits, 0.0)
        flip = self.hi[entering] - self.lo[entering]
        theta = float(limits.min()) if self.m else math.inf
        if flip <= theta:
            return flip, None, False
        if math.isinf(theta):
            return math.inf, None, False
        ties = np.flatnonzero(limits <= theta)
        pos = int(ties[np.argmin(basis[ties])])
        return theta, pos, bool(inc[pos])

    def _run(self, cost: np.ndarray) -> LpStatus:
        degenerate = False
        while True:
            basis_matrix = self.M[:, self.basis]
            self._refresh_basic(basis_matrix)
            y = _solve(basis_matrix.T, cost[self.basis])
            reduced = cost - self.M.T @ y
            entering, direction = self._price(reduced, degenerate)
            if entering is None:
                return LpStatus.OPTIMAL
            if self.iterations >= self.max_iterations:
                raise SolverError(f"simplex exceeded {self.max_iterations} iterations")
            w = _solve(basis_matrix, self.M[:, entering])
            delta = -direction * w
            theta, leave_pos, leave_upper = self._ratio_test(entering, delta)
            if math.isinf(theta):
                return LpStatus.UNBOUNDED
            self.iterations += 1
            degenerate = theta <= self.options.zero_tol
            if leave_pos is None:
                self.at_upper[entering] = direction > 0
                self.x[entering] = self.hi[entering] if direction > 0 else self.lo[entering]
                continue
            leaving = self.basis[leave_pos]
            self.x[entering] += direction * theta
            self.x[leaving] = self.hi[leaving] if leave_upper else self.lo[leaving]
            self.at_upper[leaving] = leave_upper
            self.at_upper[entering] = False
            self.is_basic[leaving] = False
            self.is_basic[entering] = True
            self.basis[leave_pos] = entering

    def solve(self) -> LpSolution:
        """Run phase one then phase two.

        Returns:
            LpSolution: Status, primal point and objective value
        """
        total = self.M.shape[1]
        first_artificial = total - self.num_artificial
        if self.num_artificial:
            phase_one = np.zeros(total)
            phase_one[first_artificial:] = -1.0
            self._run(phase_one)
            infeasibility = float(self.x[first_artificial:].sum())
            scale = max(1.0, float(np.abs(self.b).max()))
            if infeasibility > self.options.feasibility_tol * scale:
                logger.debug(f"Phase one ended with infeasibility {infeasibility:.3e}")
                return LpSolution(self.lo[:self.n].copy(), 0.0, LpStatus.INFEASIBLE, self.iterations)
            self.hi[first_artificial:] = 0.0
            self.at_upper[first_artificial:] = False
            self.x[first_artificial:] = np.where(self.is_basic[first_artificial:], self.x[first_artificial:], 0.0)

        cost = np.zeros(total)
        cost[:self.n] = np.asarray(self.lp.objective, dtype=float)
        status = self._run(cost)
        x = np.clip(self.x[:self.n], self.lo[:self.n], self.hi[:self.n])
        if status is LpStatus.UNBOUNDED:
            return LpSolution(x, math.inf, status, self.iterations)
        return LpSolution(x, float(cost[:self.n] @ x), status, self.iterations)


def solve_lp(lp: LinearProgram, options: Optional[SimplexOptions] = None) -> LpSolution:
    """Solve a bounded linear program with the primal simplex method.

    Args:
        lp: Program to maximise
        options: Pricing rule and tolerances

    Returns:
        LpSolution: Optimal point, or infeasible/unbounded status

    Raises:
        StructuralError: If the program is malformed
        SolverError: If the iteration limit is reached
    """
    solution = BoundedSimplex(lp, options).solve()
    logger.debug(
        f"LP with {lp.num_variables} variables and {len(lp.ineq) + len(lp.eq)} rows: "
        f"{solution.status.value} after {solution.iterations} iterations"
    )
    return solution
