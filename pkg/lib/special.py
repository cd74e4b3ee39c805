import math
import logging

import numpy as np
from scipy.special import gammaln

from lib.errors import DomainError, ConvergenceError

logger = logging.getLogger(__name__)

MAX_ITERATIONS = 10_000
EPSILON = 1e-15
TINY = 1e-300


def _continued_fraction(a: float, b: float, x: float) -> float:
    """Continued fraction of the incomplete beta function (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < TINY:
        d = TINY
    d = 1.0 / d
    h = d
    for m in range(1, MAX_ITERATIONS + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPSILON:
            return h
    raise ConvergenceError(f"incomplete beta continued fraction did not converge for a={a}, b={b}, x={x}",
                           iterations=MAX_ITERATIONS)


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b).

    The continued fraction is evaluated directly when x < (a+1)/(a+b+2) and
    through the symmetry I_x(a, b) = 1 - I_{1-x}(b, a) otherwise.

    Args:
        a: First shape parameter, positive
        b: Second shape parameter, positive
        x: Point in [0, 1]

    Returns:
        float: I_x(a, b) in [0, 1]

    Raises:
        DomainError: If a or b is not positive or x is outside [0, 1]
    """
    if not (a > 0 and b > 0):
        raise DomainError(f"shape parameters must be positive, got a={a}, b={b}")
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"x={x} outside [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = gammaln(a + b) - gammaln(a) - gammaln(b) + a * math.log(x) + b * math.log1p(-x)
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return float(min(1.0, max(0.0, front * _continued_fraction(a, b, x) / a)))
    return float(min(1.0, max(0.0, 1.0 - front * _continued_fraction(b, a, 1.0 - x) / b)))


def beta_cdf(x: np.ndarray, a: float, b: float) -> np.ndarray:
    """Beta(a, b) distribution function at each point of x."""
    x = np.asarray(x, dtype=float)
    return np.array([regularized_incomplete_beta(a, b, float(v)) for v in x.ravel()]).reshape(x.shape)
