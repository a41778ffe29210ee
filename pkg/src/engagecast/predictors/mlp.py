"""Single-hidden-layer perceptron regressor trained with Adam.

Full-batch training on halved mean squared error, rectified hidden units,
and early stopping on an internal validation slice (10% of rows, seeded
shuffle) with best-weights restoration. Inputs are expected standardized;
the registry wraps this behind the shared scaler.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteLoss, PredictorError as MlpError


@dataclass
class MlpParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float

    def copy(self) -> "MlpParams":
        return MlpParams(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2)


def init_params(n_features: int, hidden: int, rng: np.random.Generator) -> MlpParams:
    return MlpParams(
        w1=rng.normal(0.0, np.sqrt(2.0 / n_features), (n_features, hidden)),
        b1=np.zeros(hidden),
        w2=rng.normal(0.0, np.sqrt(1.0 / hidden), hidden),
        b2=0.0,
    )


def forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    hidden = np.maximum(0.0, x @ params.w1 + params.b1)
    return hidden @ params.w2 + params.b2


def loss_and_grad(params: MlpParams, x: np.ndarray, y: np.ndarray):
    """(loss, gradient) for loss = mean((pred - y)^2) / 2."""
    n = len(y)
    pre = x @ params.w1 + params.b1
    hidden = np.maximum(0.0, pre)
    pred = hidden @ params.w2 + params.b2
    err = (pred - y) / n
    loss = float(np.mean((pred - y) ** 2) / 2.0)
    g_w2 = hidden.T @ err
    g_b2 = float(err.sum())
    back = np.outer(err, params.w2) * (pre > 0)
    g_w1 = x.T @ back
    g_b1 = back.sum(axis=0)
    return loss, MlpParams(g_w1, g_b1, g_w2, g_b2)


@dataclass
class MlpModel:
    params: MlpParams

    def predict(self, x: np.ndarray) -> np.ndarray:
        return forward(self.params, np.atleast_2d(x))


def fit_mlp(
    x: np.ndarray,
    y: np.ndarray,
    hidden: int = 64,
    learning_rate: float = 0.01,
    epochs: int = 300,
    patience: int = 25,
    val_fraction: float = 0.1,
    seed: int = 0,
) -> MlpModel:
    if len(y) == 0:
        raise MlpError("no training rows")
    rng = np.random.default_rng(seed)
    params = init_params(x.shape[1], hidden, rng)
    params.b2 = float(y.mean())

    n_val = int(round(len(y) * val_fraction))
    order = rng.permutation(len(y))
    if 0 < n_val < len(y):
        val_idx, train_idx = order[:n_val], order[n_val:]
    else:
        val_idx, train_idx = order[:0], order
    x_train, y_train = x[train_idx], y[train_idx]
    x_val, y_val = x[val_idx], y[val_idx]

    moments = MlpParams(
        np.zeros_like(params.w1), np.zeros_like(params.b1),
        np.zeros_like(params.w2), 0.0,
    )
    velocities = moments.copy()
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    best = params.copy()
    best_val = np.inf
    stale = 0
    for step in range(1, epochs + 1):
        loss, grad = loss_and_grad(params, x_train, y_train)
        if not np.isfinite(loss):
            raise NonFiniteLoss(f"training loss non-finite at epoch {step}")
        for name in ("w1", "b1", "w2", "b2"):
            g = getattr(grad, name)
            m = beta1 * getattr(moments, name) + (1 - beta1) * g
            v = beta2 * getattr(velocities, name) + (1 - beta2) * (
                g * g if isinstance(g, np.ndarray) else g**2
            )
            setattr(moments, name, m)
            setattr(velocities, name, v)
            m_hat = m / (1 - beta1**step)
            v_hat = v / (1 - beta2**step)
            update = learning_rate * m_hat / (np.sqrt(v_hat) + eps)
            setattr(params, name, getattr(params, name) - update)
        if len(val_idx):
            val_loss = float(np.mean((forward(params, x_val) - y_val) ** 2))
            if val_loss < best_val - 1e-12:
                best_val = val_loss
                best = params.copy()
                stale = 0
            else:
                stale += 1
                if stale >= patience:
                    break
        else:
            best = params.copy()
    return MlpModel(params=best)
