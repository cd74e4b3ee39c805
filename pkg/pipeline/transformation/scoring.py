import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from lib.errors import ConvergenceError, StructuralError
from pipeline.ingestion.german_credit import (
    CATEGORICAL_ATTRIBUTES,
    NUMERIC_ATTRIBUTES,
    GermanRecord,
    records_to_frame,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LogisticConfig:
    """Ridge-regularised logistic regression fitted by IRLS."""
    ridge: float = 1e-6
    tol: float = 1e-8
    max_iter: int = 100


@dataclass(frozen=True)
class LogisticModel:
    """Fitted coefficients with the standardisation used for the design matrix."""
    feature_names: Tuple[str, ...]
    intercept: float
    coefficients: np.ndarray
    numeric_means: Dict[str, float]
    numeric_scales: Dict[str, float]
    categorical: Tuple[str, ...]
    iterations: int

    def design(self, frame: pd.DataFrame) -> np.ndarray:
        matrix, _, _, names = build_design(frame, list(self.numeric_means), list(self.categorical),
                                           self.numeric_means, self.numeric_scales)
        if tuple(names) != self.feature_names:
            raise StructuralError("frame does not produce the fitted feature columns")
        return matrix

    def predict_proba(self, frame: pd.DataFrame) -> np.ndarray:
        return _sigmoid(self.intercept + self.design(frame) @ self.coefficients)


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -eta))


def build_design(frame: pd.DataFrame, numeric: Sequence[str], categorical: Sequence[str],
                 means: Optional[Dict[str, float]] = None,
                 scales: Optional[Dict[str, float]] = None) -> Tuple[np.ndarray, Dict[str, float], Dict[str, float], List[str]]:
    """Standardised numerics followed by one-hot categoricals (first code dropped).

    Args:
        frame: Table holding the feature columns
        numeric: Numeric column names
        categorical: Categorical column names
        means: Centering values, computed from the frame when omitted
        scales: Scaling values, computed from the frame when omitted

    Returns:
        tuple: (design matrix, means, scales, column names)
    """
    means = dict(means) if means is not None else {c: float(frame[c].mean()) for c in numeric}
    if scales is None:
        scales = {}
        for c in numeric:
            std = float(frame[c].std(ddof=0))
            scales[c] = std if std > 0 else 1.0
    parts = [((frame[c].astype(float) - means[c]) / scales[c]).rename(c) for c in numeric]
    if categorical:
        parts.append(pd.get_dummies(frame[list(categorical)], drop_first=True, dtype=float))
    design = pd.concat(parts, axis=1) if parts else pd.DataFrame(index=frame.index)
    return design.to_numpy(dtype=float), means, scales, [str(c) for c in design.columns]


def _penalised_loglik(X: np.ndarray, y: np.ndarray, beta: np.ndarray, penalty: np.ndarray) -> float:
    eta = X @ beta
    return float(y @ eta - np.logaddexp(0.0, eta).sum() - 0.5 * (penalty * beta * beta).sum())


def fit_irls(X: np.ndarray, y: np.ndarray, config: LogisticConfig) -> Tuple[np.ndarray, int]:
    """Newton-Raphson (IRLS) for ridge logistic regression with step halving.

    ``X`` must carry the intercept in column 0. The intercept is not
    penalised unless every label is the same, when the optimum would
    otherwise be infinite.

    Args:
        X: Design matrix with leading column of ones
        y: Labels in {0, 1}
        config: Ridge strength and stopping rule

    Returns:
        Tuple[np.ndarray, int]: Coefficients and iterations used

    Raises:
        ConvergenceError: If max|Δβ| stays above ``tol`` for ``max_iter`` steps
    """
    penalty = np.full(X.shape[1], config.ridge)
    if np.unique(y).size > 1:
        penalty[0] = 0.0
    beta = np.zeros(X.shape[1])
    current = _penalised_loglik(X, y, beta, penalty)
    for iteration in range(1, config.max_iter + 1):
        p = _sigmoid(X @ beta)
        w = p * (1.0 - p)
        gradient = X.T @ (y - p) - penalty * beta
        hessian = (X * w[:, None]).T @ X + np.diag(penalty)
        step = np.linalg.lstsq(hessian, gradient, rcond=None)[0]
        scale = 1.0
        while scale > 1e-10:
            candidate = _penalised_loglik(X, y, beta + scale * step, penalty)
            if candidate >= current - 1e-12 * abs(current):
                break
            scale /= 2.0
        delta = scale * step
        beta = beta + delta
        current = _penalised_loglik(X, y, beta, penalty)
        if np.max(np.abs(delta)) < config.tol:
            return beta, iteration
    raise ConvergenceError(f"IRLS did not converge in {config.max_iter} iterations", last_iterate=beta,
                           iterations=config.max_iter)


def fit_frame(frame: pd.DataFrame, label: str, numeric: Sequence[str], categorical: Sequence[str],
              config: Optional[LogisticConfig] = None) -> Tuple[LogisticModel, np.ndarray]:
    """Fit a logistic model on a table and score every row.

    Args:
        frame: Features and label
        label: Boolean or 0/1 label column
        numeric: Numeric feature columns, standardised before fitting
        categorical: Categorical feature columns, one-hot encoded
        config: Fit settings

    Returns:
        Tuple[LogisticModel, np.ndarray]: Model and in-sample probabilities
    """
    config = config or LogisticConfig()
    design, means, scales, names = build_design(frame, numeric, categorical)
    X = np.hstack([np.ones((len(frame), 1)), design])
    y = frame[label].astype(float).to_numpy()
    single_class = np.unique(y).size < 2
    if single_class:
        logger.warning(f"All {len(y)} labels are equal; fitting an intercept-only model with a ridge on the intercept")
        X = X[:, :1]
    try:
        beta, iterations = fit_irls(X, y, config)
    except ConvergenceError as e:
        logger.error(f"Failed to fit logistic model: {e}")
        raise
    if single_class:
        beta = np.concatenate([beta, np.zeros(design.shape[1])])
    model = LogisticModel(
        feature_names=tuple(names),
        intercept=float(beta[0]),
        coefficients=beta[1:],
        numeric_means=means,
        numeric_scales=scales,
        categorical=tuple(categorical),
        iterations=iterations,
    )
    probabilities = _sigmoid(model.intercept + design @ model.coefficients)
    logger.info(f"Fitted logistic model with {len(names)} features in {iterations} iterations")
    return model, probabilities


def fit_logistic(records: List[GermanRecord],
                 config: Optional[LogisticConfig] = None) -> Tuple[LogisticModel, np.ndarray]:
    """Fit the German Credit model on all records and score them in-sample.

    Args:
        records: Parsed German Credit records
        config: Fit settings

    Returns:
        Tuple[LogisticModel, np.ndarray]: Model and probability of good credit per record
    """
    frame = records_to_frame(records)
    return fit_frame(frame, "good", NUMERIC_ATTRIBUTES, list(CATEGORICAL_ATTRIBUTES), config)
