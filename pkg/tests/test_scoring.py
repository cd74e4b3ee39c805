import logging

import numpy as np
import pandas as pd
import pytest

from lib.errors import ConvergenceError, StructuralError
from pipeline.transformation.scoring import LogisticConfig, build_design, fit_frame, fit_irls


def _synthetic_frame(n=3000, seed=0):
    rng = np.random.default_rng(seed)
    frame = pd.DataFrame({
        "income": rng.normal(50.0, 10.0, n),
        "age": rng.normal(40.0, 12.0, n),
        "housing": pd.Categorical(rng.choice(["rent", "own", "free"], n), categories=["free", "own", "rent"]),
    })
    eta = 0.5 + 1.2 * (frame["income"] - 50.0) / 10.0 - 0.8 * (frame["housing"] == "rent")
    frame["good"] = rng.random(n) < 1.0 / (1.0 + np.exp(-eta))
    return frame


def test_build_design():
    """Numerics are standardised; categoricals lose their first code"""
    frame = _synthetic_frame(200)
    matrix, means, scales, names = build_design(frame, ["income", "age"], ["housing"])
    assert names == ["income", "age", "housing_own", "housing_rent"]
    assert matrix.shape == (200, 4)
    np.testing.assert_allclose(matrix[:, :2].mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(matrix[:, :2].std(axis=0), 1.0, atol=1e-12)
    assert means["income"] == pytest.approx(frame["income"].mean())
    reused, *_ = build_design(frame.iloc[:5], ["income", "age"], ["housing"], means, scales)
    np.testing.assert_allclose(reused, matrix[:5])


def test_fit_recovers_coefficients():
    frame = _synthetic_frame()
    model, probabilities = fit_frame(frame, "good", ["income", "age"], ["housing"])
    coefficients = dict(zip(model.feature_names, model.coefficients))
    assert coefficients["income"] == pytest.approx(1.2, abs=0.2)
    assert coefficients["age"] == pytest.approx(0.0, abs=0.2)
    assert coefficients["housing_rent"] - coefficients["housing_own"] == pytest.approx(-0.8, abs=0.3)
    assert np.all((probabilities > 0) & (probabilities < 1))
    np.testing.assert_allclose(model.predict_proba(frame), probabilities, atol=1e-12)


def test_fit_is_stationary():
    """Penalised score vanishes at the returned coefficients"""
    frame = _synthetic_frame(500, seed=4)
    design, *_ = build_design(frame, ["income", "age"], ["housing"])
    X = np.hstack([np.ones((len(frame), 1)), design])
    y = frame["good"].astype(float).to_numpy()
    config = LogisticConfig(ridge=1e-3)
    beta, iterations = fit_irls(X, y, config)
    p = 1.0 / (1.0 + np.exp(-X @ beta))
    penalty = np.full(X.shape[1], config.ridge)
    penalty[0] = 0.0
    np.testing.assert_allclose(X.T @ (y - p) - penalty * beta, 0.0, atol=1e-6)
    assert iterations < 25


def test_single_class_fits_intercept_only(caplog):
    frame = _synthetic_frame(100)
    frame["good"] = True
    with caplog.at_level(logging.WARNING):
        model, probabilities = fit_frame(frame, "good", ["income"], ["housing"])
    assert "labels are equal" in caplog.text
    assert np.all(model.coefficients == 0.0)
    assert np.isfinite(model.intercept) and model.intercept > 0
    np.testing.assert_allclose(probabilities, probabilities[0])


def test_non_convergence_carries_last_iterate():
    frame = _synthetic_frame(300)
    with pytest.raises(ConvergenceError) as info:
        fit_frame(frame, "good", ["income", "age"], ["housing"], LogisticConfig(tol=0.0, max_iter=2))
    assert info.value.iterations == 2
    assert info.value.last_iterate.shape == (5,)


def test_predict_rejects_other_columns():
    frame = _synthetic_frame(100)
    model, _ = fit_frame(frame, "good", ["income"], ["housing"])
    other = frame.assign(housing=pd.Categorical(frame["housing"].astype(str), categories=["own", "rent"]))
    with pytest.raises(StructuralError):
        model.predict_proba(other)
