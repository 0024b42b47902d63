"""Weighted, penalized nonnegative least squares with a free intercept.

Minimizes ``sum_l w_l (y_l - b0 - X_l b)^2 + lam * ||D b||^2`` over b0 free
and b >= 0. The intercept is removed by weighted centering; the penalty is
appended as extra rows, leaving a plain NNLS problem solved with the
Lawson-Hanson active-set method.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# KKT tolerances, relative to max(1, max|2 X'Wy|): stationarity on the active
# set, dual feasibility off it, complementary slackness, intercept equation.
KKT_STATIONARITY_TOL = 1e-8
KKT_DUAL_TOL = 1e-8
KKT_SLACK_TOL = 1e-6
KKT_INTERCEPT_TOL = 1e-9


@dataclass(frozen=True)
class RegressionFit:
    beta0: float
    beta: np.ndarray
    objective: float

    @property
    def active_set(self) -> np.ndarray:
        return np.flatnonzero(self.beta > 0)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.beta0 + np.atleast_2d(X) @ self.beta


def objective(y, X, w, D, lam, beta0, beta) -> float:
    r = y - beta0 - X @ beta
    p = D @ beta
    return float(np.sum(w * r * r) + lam * (p @ p))


def gradient(y, X, w, D, lam, beta0, beta) -> np.ndarray:
    """Gradient of the objective with respect to beta."""
    r = y - beta0 - X @ beta
    return -2.0 * X.T @ (w * r) + 2.0 * lam * (D.T @ (D @ beta))


def nnls(A: np.ndarray, b: np.ndarray, max_iter: int | None = None, tol: float | None = None) -> np.ndarray:
    """Lawson-Hanson active-set solution of min ||Ax - b|| s.t. x >= 0."""
    m, n = A.shape
    max_iter = max_iter or 3 * n + 30
    AtA = A.T @ A
    Atb = A.T @ b
    if tol is None:
        tol = 10 * np.finfo(float).eps * max(1.0, np.abs(AtA).max(initial=0.0)) * max(m, n)
    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    grad = Atb - AtA @ x
    it = 0
    while (~passive).any() and (grad[~passive] > tol).any():
        cand = np.where(~passive, grad, -np.inf)
        passive[int(np.argmax(cand))] = True
        while True:
            it += 1
            if it > max_iter:
                break
            z = np.zeros(n)
            idx = np.flatnonzero(passive)
            z[idx] = np.linalg.lstsq(A[:, idx], b, rcond=None)[0]
            if (z[idx] > 0).all():
                x = z
                break
            neg = idx[z[idx] <= 0]
            alpha = np.min(x[neg] / (x[neg] - z[neg]))
            x = x + alpha * (z - x)
            passive &= ~((x <= tol) & passive)
            x[~passive] = 0.0
        if it > max_iter:
            break
        grad = Atb - AtA @ x
    return x


def fit_weighted_penalized_nnls(
    y: np.ndarray,
    X: np.ndarray,
    w: np.ndarray,
    D: np.ndarray,
    lam: float,
) -> RegressionFit:
    y = np.asarray(y, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    w = np.asarray(w, dtype=float)
    D = np.atleast_2d(np.asarray(D, dtype=float))
    if X.shape[0] != len(y) or len(w) != len(y) or D.shape != (X.shape[1], X.shape[1]):
        raise ValueError("inconsistent shapes")
    for name, arr in (("y", y), ("X", X), ("w", w), ("D", D)):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{name} has non-finite entries")
    if not np.isfinite(lam) or lam < 0:
        raise ValueError("penalty must be finite and >= 0")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")

    wsum = w.sum()
    ybar = w @ y / wsum
    xbar = w @ X / wsum
    sw = np.sqrt(w)
    A = np.vstack([sw[:, None] * (X - xbar), np.sqrt(lam) * D])
    b = np.concatenate([sw * (y - ybar), np.zeros(D.shape[0])])
    beta = nnls(A, b)
    beta0 = float(ybar - xbar @ beta)
    return RegressionFit(beta0, beta, objective(y, X, w, D, lam, beta0, beta))
