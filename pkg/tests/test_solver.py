import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ledgercast.forecast.solver import (
    KKT_DUAL_TOL,
    KKT_INTERCEPT_TOL,
    KKT_SLACK_TOL,
    KKT_STATIONARITY_TOL,
    fit_weighted_penalized_nnls,
    gradient,
    nnls,
    objective,
)

from oracles import enumerate_active_sets, kkt_violation, projected_gradient_fit, random_problem


def test_exact_single_column_fit():
    y = np.array([3.0, 5.0, 4.0, 9.0, 1.0])
    c = 2.5
    X = (y - c)[:, None]
    fit = fit_weighted_penalized_nnls(y, X, np.ones(5), np.zeros((1, 1)), 0.0)
    assert fit.beta[0] == pytest.approx(1.0, abs=1e-12)
    assert fit.beta0 == pytest.approx(c, abs=1e-12)
    assert fit.objective == pytest.approx(0.0, abs=1e-20)


def test_heavy_penalty_drives_coefficients_to_zero():
    rng = np.random.default_rng(3)
    y, X, w, _ = random_problem(rng, 20, 3)
    D = np.eye(3) + 0.5
    fit = fit_weighted_penalized_nnls(y, X, w, D, 1e12)
    assert np.abs(fit.beta).max() < 1e-8
    assert fit.beta0 == pytest.approx(w @ y / w.sum(), abs=1e-6)


def test_small_problem_matches_projected_gradient():
    rng = np.random.default_rng(10)
    y, X, w, D = random_problem(rng, 10, 3)
    fit = fit_weighted_penalized_nnls(y, X, w, D, 0.5)
    _, _, f_pg = projected_gradient_fit(y, X, w, D, 0.5)
    assert fit.objective <= f_pg * (1 + 1e-6) + 1e-12
    assert fit.objective == pytest.approx(f_pg, rel=1e-6)


@pytest.mark.parametrize("lam", [0.0, 0.5, 5.0])
def test_matches_active_set_enumeration(lam):
    rng = np.random.default_rng(int(lam * 10) + 1)
    for _ in range(40):
        y, X, w, D = random_problem(rng)
        fit = fit_weighted_penalized_nnls(y, X, w, D, lam)
        _, _, best = enumerate_active_sets(y, X, w, D, lam)
        assert fit.objective == pytest.approx(best, rel=1e-9, abs=1e-12)


def test_penalty_norm_is_monotone_in_lambda():
    rng = np.random.default_rng(99)
    for _ in range(20):
        y, X, w, D = random_problem(rng, 25, 5)
        norms = [np.linalg.norm(D @ fit_weighted_penalized_nnls(y, X, w, D, lam).beta) for lam in (0, 0.1, 0.5, 1, 2, 5, 10, 100)]
        assert all(b <= a * (1 + 1e-7) + 1e-10 for a, b in zip(norms, norms[1:]))


def test_intercept_solves_weighted_mean_equation():
    rng = np.random.default_rng(5)
    y, X, w, D = random_problem(rng, 31, 4)
    fit = fit_weighted_penalized_nnls(y, X, w, D, 1.0)
    assert w @ (y - fit.beta0 - X @ fit.beta) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("bad", ["nan_y", "inf_x", "zero_w", "neg_lam", "shape"])
def test_invalid_inputs_raise(bad):
    y, X, w, D = np.ones(4), np.ones((4, 2)), np.ones(4), np.zeros((2, 2))
    lam = 1.0
    if bad == "nan_y":
        y = np.array([1, np.nan, 1, 1])
    elif bad == "inf_x":
        X = X.copy()
        X[0, 0] = np.inf
    elif bad == "zero_w":
        w = np.array([1, 0, 1, 1.0])
    elif bad == "neg_lam":
        lam = -1
    else:
        D = np.zeros((3, 3))
    with pytest.raises(ValueError):
        fit_weighted_penalized_nnls(y, X, w, D, lam)


def test_nnls_agrees_with_scipy():
    scipy_opt = pytest.importorskip("scipy.optimize")
    rng = np.random.default_rng(7)
    for _ in range(100):
        A = rng.normal(size=(int(rng.integers(3, 20)), int(rng.integers(1, 8))))
        b = rng.normal(size=A.shape[0])
        x = nnls(A, b)
        ref, _ = scipy_opt.nnls(A, b)
        assert np.linalg.norm(A @ x - b) == pytest.approx(np.linalg.norm(A @ ref - b), rel=1e-9, abs=1e-12)
        assert (x >= 0).all()


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lam=st.sampled_from([0.0, 0.1, 1.0, 10.0]))
def test_kkt_conditions_hold(seed, lam):
    rng = np.random.default_rng(seed)
    y, X, w, D = random_problem(rng)
    fit = fit_weighted_penalized_nnls(y, X, w, D, lam)
    assert (fit.beta >= 0).all()
    v = kkt_violation(fit, y, X, w, D, lam)
    assert v["stationary"] < KKT_STATIONARITY_TOL and v["dual"] < KKT_DUAL_TOL
    assert v["intercept"] < KKT_INTERCEPT_TOL and v["slack"] < KKT_SLACK_TOL
    assert fit.objective == pytest.approx(objective(y, X, w, D, lam, fit.beta0, fit.beta))
