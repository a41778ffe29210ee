"""Linear forecasters: least squares, ridge, and coordinate-descent lasso.

All three fit on z-scored features (columns standardized on the training
fold) with an unpenalized intercept, and report coefficients in that
standardized space so magnitudes are comparable across features. Raw-space
equivalents are derived on demand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDesign, PredictorError as LinearFitError


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        mean = x.mean(axis=0)
        scale = x.std(axis=0)
        scale = np.where(scale == 0.0, 1.0, scale)
        return cls(mean=mean, scale=scale)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.scale


@dataclass
class LinearModel:
    coef_std: np.ndarray
    intercept: float
    scaler: Standardizer

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.scaler.transform(np.atleast_2d(x)) @ self.coef_std + self.intercept

    def raw_coefficients(self) -> tuple[np.ndarray, float]:
        """(coefficients, intercept) in the original feature units."""
        coef = self.coef_std / self.scaler.scale
        intercept = self.intercept - float(coef @ self.scaler.mean)
        return coef, intercept


def _check_target(y: np.ndarray) -> None:
    if len(y) == 0:
        raise DegenerateDesign("no training rows")
    if np.std(y) == 0.0:
        raise DegenerateDesign("zero-variance target")
    if not np.all(np.isfinite(y)):
        raise LinearFitError("non-finite target values")


def fit_ols(x: np.ndarray, y: np.ndarray, jitter: float = 1e-8) -> LinearModel:
    """Normal equations on standardized features with a tiny ridge jitter."""
    _check_target(y)
    scaler = Standardizer.fit(x)
    xs = scaler.transform(x)
    yc = y - y.mean()
    a = xs.T @ xs + jitter * np.eye(x.shape[1])
    coef = np.linalg.solve(a, xs.T @ yc)
    return LinearModel(coef_std=coef, intercept=float(y.mean()), scaler=scaler)


def fit_ridge(x: np.ndarray, y: np.ndarray, lam: float) -> LinearModel:
    """Closed-form ridge; the penalty applies in standardized space."""
    _check_target(y)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    scaler = Standardizer.fit(x)
    xs = scaler.transform(x)
    yc = y - y.mean()
    a = xs.T @ xs + lam * np.eye(x.shape[1])
    if lam == 0.0:
        a += 1e-8 * np.eye(x.shape[1])
    coef = np.linalg.solve(a, xs.T @ yc)
    return LinearModel(coef_std=coef, intercept=float(y.mean()), scaler=scaler)


def lasso_objective(xs: np.ndarray, yc: np.ndarray, coef: np.ndarray, alpha: float) -> float:
    n = len(yc)
    resid = yc - xs @ coef
    return float(resid @ resid) / (2 * n) + alpha * float(np.abs(coef).sum())


def lasso_duality_gap(
    xs: np.ndarray, yc: np.ndarray, coef: np.ndarray, alpha: float
) -> float:
    """Gap between the primal objective and the scaled-residual dual point."""
    n = len(yc)
    resid = yc - xs @ coef
    primal = float(resid @ resid) / (2 * n) + alpha * float(np.abs(coef).sum())
    dual_norm = float(np.max(np.abs(xs.T @ resid))) / n if xs.shape[1] else 0.0
    s = 1.0 if dual_norm <= alpha else alpha / dual_norm
    dual = -(s * s) * float(resid @ resid) / (2 * n) + s * float(resid @ yc) / n
    return primal - dual


def fit_lasso(
    x: np.ndarray,
    y: np.ndarray,
    alpha: float,
    tol: float = 1e-6,
    max_iters: int = 2000,
) -> LinearModel:
    """Cyclic coordinate descent for (1/2n)*RSS + alpha*||w||_1.

    Iterates full coordinate sweeps until the duality gap drops below
    ``tol`` times the null objective (a scale-free stopping rule).
    """
    _check_target(y)
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    scaler = Standardizer.fit(x)
    xs = scaler.transform(x)
    yc = y - y.mean()
    n, p = xs.shape
    col_norm = (xs * xs).sum(axis=0) / n
    coef = np.zeros(p)
    resid = yc.copy()
    gap_scale = max(1.0, float(yc @ yc) / (2 * n))
    for _ in range(max_iters):
        for j in range(p):
            if col_norm[j] == 0.0:
                continue
            old = coef[j]
            rho = old * col_norm[j] + float(xs[:, j] @ resid) / n
            new = np.sign(rho) * max(abs(rho) - alpha, 0.0) / col_norm[j]
            if new != old:
                resid += xs[:, j] * (old - new)
                coef[j] = new
        if lasso_duality_gap(xs, yc, coef, alpha) < tol * gap_scale:
            break
    return LinearModel(coef_std=coef, intercept=float(y.mean()), scaler=scaler)


def lasso_subgradient_violation(
    x: np.ndarray, y: np.ndarray, model: LinearModel, alpha: float
) -> float:
    """Worst-coordinate violation of the lasso KKT conditions (test hook)."""
    xs = model.scaler.transform(x)
    yc = y - model.intercept
    resid = yc - xs @ model.coef_std
    grad = xs.T @ resid / len(yc)
    worst = 0.0
    for j in range(len(model.coef_std)):
        if model.coef_std[j] != 0.0:
            worst = max(worst, abs(grad[j] - alpha * np.sign(model.coef_std[j])))
        else:
            worst = max(worst, max(0.0, abs(grad[j]) - alpha))
    return float(worst)
