"""单隐层感知机: sigmoid 输出，交叉熵 + L2，全批量 Adam，训练损失早停。"""
from __future__ import annotations

import logging
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.special import expit

from src.config import Family
from src.errors import NonFiniteLoss
from src.models.base import FamilyImpl, ModelSpec, TrainedModel, fit_model, register, require_choice, require_int, require_real

logger = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "tanh")
BETA1, BETA2, ADAM_EPS = 0.9, 0.999, 1e-8
IMPROVE_TOL = 1e-4
PARAM_NAMES = ("W1", "b1", "W2", "b2")


def _validate(hp: Dict[str, Any]) -> None:
    require_int(hp, "hidden", 1)
    require_choice(hp, "activation", ACTIVATIONS)
    require_real(hp, "alpha", 0.0)
    require_real(hp, "learning_rate", 0.0, open_low=True)
    require_int(hp, "max_epochs", 1)
    require_int(hp, "patience", 1)


def _hidden(params: Dict[str, np.ndarray], X: np.ndarray, activation: str) -> Tuple[np.ndarray, np.ndarray]:
    Z = X @ params["W1"] + params["b1"]
    A = np.maximum(Z, 0.0) if activation == "relu" else np.tanh(Z)
    return Z, A


def mlp_loss_and_grad(
    params: Dict[str, np.ndarray], X: np.ndarray, y: np.ndarray, alpha: float, activation: str
) -> Tuple[float, Dict[str, np.ndarray]]:
    """平均交叉熵 + alpha/2 * (||W1||² + ||W2||²) 及其梯度"""
    n = X.shape[0]
    W1, W2 = params["W1"], params["W2"]
    Z, A = _hidden(params, X, activation)
    z2 = A @ W2 + params["b2"]
    loss = float(np.mean(np.logaddexp(0.0, z2) - y * z2)) + 0.5 * alpha * (float(np.sum(W1 * W1)) + float(W2 @ W2))

    dz2 = (expit(z2) - y) / n
    dA = np.outer(dz2, W2)
    dZ = dA * (Z > 0) if activation == "relu" else dA * (1.0 - A * A)
    grads = {
        "W1": X.T @ dZ + alpha * W1,
        "b1": dZ.sum(axis=0),
        "W2": A.T @ dz2 + alpha * W2,
        "b2": np.array(dz2.sum()),
    }
    return loss, grads


def init_params(p: int, hidden: int, activation: str, rng: np.random.Generator) -> Dict[str, np.ndarray]:
    # relu 用 He 初始化，tanh 用 1/fan_in
    gain = 2.0 if activation == "relu" else 1.0
    return {
        "W1": rng.normal(0.0, np.sqrt(gain / p), size=(p, hidden)),
        "b1": np.zeros(hidden),
        "W2": rng.normal(0.0, np.sqrt(gain / hidden), size=hidden),
        "b2": np.array(0.0),
    }


def _fit(X: np.ndarray, y: np.ndarray, hp: Dict[str, Any], seed: int):
    rng = np.random.default_rng(seed)
    activation, alpha, lr = hp["activation"], float(hp["alpha"]), float(hp["learning_rate"])
    params = init_params(X.shape[1], hp["hidden"], activation, rng)
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(val) for k, val in params.items()}
    yf = y.astype(np.float64)

    history = []
    best = np.inf
    stale = 0
    for epoch in range(1, hp["max_epochs"] + 1):
        loss, grads = mlp_loss_and_grad(params, X, yf, alpha, activation)
        if not np.isfinite(loss):
            raise NonFiniteLoss(f"MLP 第 {epoch} 轮损失非有限: {loss}")
        history.append(loss)
        if loss > best - IMPROVE_TOL:
            stale += 1
        else:
            stale = 0
        best = min(best, loss)
        if stale >= hp["patience"]:
            logger.debug("mlp: early stop at epoch %d, loss %.6f", epoch, loss)
            break
        # Adam
        for k in PARAM_NAMES:
            m[k] = BETA1 * m[k] + (1.0 - BETA1) * grads[k]
            v[k] = BETA2 * v[k] + (1.0 - BETA2) * grads[k] ** 2
            m_hat = m[k] / (1.0 - BETA1**epoch)
            v_hat = v[k] / (1.0 - BETA2**epoch)
            params[k] = params[k] - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)

    params = {**params, "activation": activation}
    return params, {"n_epochs": len(history), "loss_history": history}


def _decision(params: Dict[str, Any], X: np.ndarray) -> np.ndarray:
    weights = {k: np.asarray(params[k], dtype=np.float64) for k in PARAM_NAMES}
    _, A = _hidden(weights, X, params["activation"])
    return expit(A @ weights["W2"] + weights["b2"])


register(Family.MLP, FamilyImpl(fit=_fit, decision=_decision, validate=_validate))


def fit_mlp(X, y, hp: Optional[Dict[str, Any]] = None, seed: int = 0) -> TrainedModel:
    return fit_model(ModelSpec(Family.MLP, hp or {}, seed), X, y)
