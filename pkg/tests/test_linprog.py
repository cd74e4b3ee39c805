import itertools
import math

import numpy as np
import pytest

from lib.errors import StructuralError
from lib.linprog import LinearProgram, LpStatus, Pricing, SimplexOptions, solve_lp


def vertex_oracle(lp: LinearProgram):
    """Best objective over all basic solutions of a bounded program, or None."""
    n = lp.num_variables
    bounds = lp.bounds_array()
    c = np.asarray(lp.objective, dtype=float)
    planes = [(np.asarray(row, dtype=float), rhs) for row, rhs in lp.ineq]
    for i in range(n):
        unit = np.eye(n)[i]
        planes += [(unit, bounds[i, 0]), (unit, bounds[i, 1])]
    planes += [(np.asarray(row, dtype=float), rhs) for row, rhs in lp.eq]
    best = None
    for chosen in itertools.combinations(range(len(planes)), n):
        rows = [planes[k] for k in chosen]
        A = np.array([r for r, _ in rows]).reshape(n, n)
        b = np.array([v for _, v in rows])
        if abs(np.linalg.det(A)) < 1e-9:
            continue
        x = np.linalg.solve(A, b)
        if np.any(x < bounds[:, 0] - 1e-9) or np.any(x > bounds[:, 1] + 1e-9):
            continue
        if any(np.dot(r, x) > v + 1e-9 for r, v in lp.ineq):
            continue
        if any(abs(np.dot(r, x) - v) > 1e-9 for r, v in lp.eq):
            continue
        value = float(c @ x)
        best = value if best is None else max(best, value)
    return best


def random_lp(rng: np.random.Generator, max_vars: int = 3, max_rows: int = 5) -> LinearProgram:
    n = int(rng.integers(1, max_vars + 1))
    m_ineq = int(rng.integers(0, min(3, max_rows) + 1))
    m_eq = int(rng.integers(0, min(n, 2, max_rows - m_ineq) + 1))
    upper = rng.choice([1.0, 2.0, 3.0], size=n)
    return LinearProgram(
        objective=rng.integers(-3, 4, size=n).astype(float),
        ineq=[(rng.integers(-3, 4, size=n).astype(float), float(rng.integers(-2, 6))) for _ in range(m_ineq)],
        eq=[(rng.integers(-3, 4, size=n).astype(float), float(rng.integers(-1, 4))) for _ in range(m_eq)],
        bounds=[(0.0, u) for u in upper],
    )


def _max_violation(lp: LinearProgram, x: np.ndarray) -> float:
    bounds = lp.bounds_array()
    ineq, eq = lp.row_values(x)
    parts = [np.maximum(bounds[:, 0] - x, 0), np.maximum(x - bounds[:, 1], 0)]
    parts.append(np.maximum(ineq - np.array([v for _, v in lp.ineq]), 0) if lp.ineq else np.zeros(0))
    parts.append(np.abs(eq - np.array([v for _, v in lp.eq])) if lp.eq else np.zeros(0))
    return float(max(np.max(p) if p.size else 0.0 for p in parts))


@pytest.mark.parametrize("pricing", [Pricing.DANTZIG, Pricing.BLAND])
def test_matches_vertex_enumeration(pricing):
    """Objective and status agree with enumerating every vertex"""
    rng = np.random.default_rng(2024)
    options = SimplexOptions(pricing=pricing)
    infeasible = 0
    for _ in range(200):
        lp = random_lp(rng)
        expected = vertex_oracle(lp)
        solution = solve_lp(lp, options)
        if expected is None:
            infeasible += 1
            assert solution.status is LpStatus.INFEASIBLE
            continue
        assert solution.status is LpStatus.OPTIMAL
        assert solution.objective_value == pytest.approx(expected, abs=1e-7)
        assert _max_violation(lp, solution.x) <= 1e-9
    assert 0 < infeasible < 200


def test_matches_vertex_enumeration_up_to_five_variables():
    rng = np.random.default_rng(77)
    for _ in range(200):
        lp = random_lp(rng, max_vars=5, max_rows=3)
        assert len(lp.ineq) + len(lp.eq) <= 3
        expected = vertex_oracle(lp)
        solution = solve_lp(lp)
        if expected is None:
            assert solution.status is LpStatus.INFEASIBLE
            continue
        assert solution.objective_value == pytest.approx(expected, abs=1e-7)
        assert _max_violation(lp, solution.x) <= 1e-9


def test_no_sampled_feasible_point_beats_optimum():
    """Random points of the box that satisfy every row never exceed the optimum"""
    rng = np.random.default_rng(31)
    accepted = 0
    for _ in range(100):
        lp = random_lp(rng, max_vars=5, max_rows=3)
        solution = solve_lp(lp)
        if not solution.is_optimal:
            continue
        bounds = lp.bounds_array()
        points = rng.uniform(bounds[:, 0], bounds[:, 1], size=(1000, lp.num_variables))
        for x in points:
            if _max_violation(lp, x) <= 1e-12:
                accepted += 1
                assert float(np.dot(lp.objective, x)) <= solution.objective_value + 1e-6
    assert accepted > 0


def test_knapsack_relaxation():
    """Fractional knapsack takes items by value density"""
    lp = LinearProgram(objective=[6.0, 10.0, 12.0], ineq=[([1.0, 2.0, 3.0], 5.0)])
    solution = solve_lp(lp)
    assert solution.is_optimal
    assert solution.objective_value == pytest.approx(24.0)
    np.testing.assert_allclose(solution.x, [1.0, 1.0, 2.0 / 3.0], atol=1e-12)
    assert solution.iterations > 0


def test_equality_rows():
    lp = LinearProgram(objective=[1.0, 1.0], eq=[([1.0, -1.0], 0.5)])
    solution = solve_lp(lp)
    np.testing.assert_allclose(solution.x, [1.0, 0.5], atol=1e-12)


def test_infeasible_program():
    lp = LinearProgram(objective=[1.0], ineq=[([1.0], -1.0)])
    assert solve_lp(lp).status is LpStatus.INFEASIBLE


def test_unbounded_program():
    lp = LinearProgram(objective=[1.0, 0.0], ineq=[([-1.0, 1.0], 1.0)], bounds=[(0.0, math.inf), (0.0, 1.0)])
    assert solve_lp(lp).status is LpStatus.UNBOUNDED


def test_empty_program():
    solution = solve_lp(LinearProgram(objective=[], ineq=[([], 0.0)]))
    assert solution.is_optimal
    assert solution.objective_value == 0.0


def test_degenerate_program_terminates():
    """Many redundant rows through the same vertex do not cycle"""
    rows = [([1.0, 1.0, 1.0], 1.0)] * 4 + [([1.0, 0.0, 0.0], 0.0), ([0.0, 1.0, 0.0], 0.0)]
    solution = solve_lp(LinearProgram(objective=[1.0, 1.0, 2.0], ineq=rows))
    assert solution.objective_value == pytest.approx(2.0)


@pytest.mark.parametrize("lp", [
    LinearProgram(objective=[1.0, 2.0], ineq=[([1.0], 1.0)]),
    LinearProgram(objective=[math.nan]),
    LinearProgram(objective=[1.0], bounds=[(1.0, 0.0)]),
    LinearProgram(objective=[1.0], bounds=[(-math.inf, 0.0)]),
    LinearProgram(objective=[1.0], bounds=[(0.0, 1.0), (0.0, 1.0)]),
])
def test_malformed_programs(lp):
    with pytest.raises(StructuralError):
        solve_lp(lp)
