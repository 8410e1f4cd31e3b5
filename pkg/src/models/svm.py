"""RBF 核软间隔 SVM，对偶问题用 SMO 求解 (最大违反对选择)。

对偶: min 1/2 αᵀQα - eᵀα，Q_ij = ỹ_i ỹ_j K(x_i, x_j)，0 <= α_i <= ω_i C，Σ α_i ỹ_i = 0
决策值 f(x) = Σ α_i ỹ_i K(x_i, x) - ρ，标签阈值 0
"""
from __future__ import annotations

import logging
from typing import Any, Dict, Optional

import numpy as np
from scipy.spatial.distance import cdist

from src.config import Family
from src.errors import InvalidSpec
from src.models.base import (
    FamilyImpl,
    ModelSpec,
    TrainedModel,
    class_weights,
    fit_model,
    register,
    require_choice,
    require_int,
    require_real,
)

logger = logging.getLogger(__name__)

TAU = 1e-12


def _validate(hp: Dict[str, Any]) -> None:
    require_real(hp, "C", 0.0, open_low=True)
    require_choice(hp, "class_weight", (None, "balanced"))
    require_real(hp, "tol", 0.0, open_low=True)
    require_int(hp, "max_passes", 1)
    gamma = hp["gamma"]
    if gamma not in ("scale", "auto"):
        if isinstance(gamma, str):
            raise InvalidSpec(f"gamma 必须是 scale、auto 或正数 (当前 {gamma!r})")
        require_real(hp, "gamma", 0.0, open_low=True)


def resolve_gamma(gamma: Any, X: np.ndarray) -> float:
    p = X.shape[1]
    if gamma == "auto":
        return 1.0 / p
    if gamma == "scale":
        var = float(X.var())
        return 1.0 / (p * var) if var > 0 else 1.0
    return float(gamma)


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    return np.exp(-gamma * cdist(A, B, "sqeuclidean"))


def _smo(K: np.ndarray, ysign: np.ndarray, box: np.ndarray, eps: float, max_iter: int):
    n = ysign.shape[0]
    alpha = np.zeros(n)
    grad = -np.ones(n)
    QD = np.diag(K).copy()
    it = 0
    converged = False
    while it < max_iter:
        yg = -ysign * grad
        up = ((ysign > 0) & (alpha < box)) | ((ysign < 0) & (alpha > 0))
        low = ((ysign > 0) & (alpha > 0)) | ((ysign < 0) & (alpha < box))
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.flatnonzero(up)[np.argmax(yg[up])])
        j = int(np.flatnonzero(low)[np.argmin(yg[low])])
        if yg[i] - yg[j] < eps:
            converged = True
            break
        it += 1

        Ci, Cj = box[i], box[j]
        Qij = ysign[i] * ysign[j] * K[i, j]
        old_i, old_j = alpha[i], alpha[j]
        ai, aj = old_i, old_j
        if ysign[i] != ysign[j]:
            quad = QD[i] + QD[j] + 2.0 * Qij
            delta = (-grad[i] - grad[j]) / (quad if quad > 0 else TAU)
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > Ci - Cj:
                if ai > Ci:
                    ai, aj = Ci, Ci - diff
            elif aj > Cj:
                aj, ai = Cj, Cj + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * Qij
            delta = (grad[i] - grad[j]) / (quad if quad > 0 else TAU)
            total = ai + aj
            ai -= delta
            aj += delta
            if total > Ci:
                if ai > Ci:
                    ai, aj = Ci, total - Ci
            elif aj < 0:
                aj, ai = 0.0, total
            if total > Cj:
                if aj > Cj:
                    aj, ai = Cj, total - Cj
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        # G = Qα - e 的增量更新
        grad += ysign * (ysign[i] * K[:, i] * (ai - old_i) + ysign[j] * K[:, j] * (aj - old_j))
    return alpha, grad, it, converged


def _rho(alpha: np.ndarray, grad: np.ndarray, ysign: np.ndarray, box: np.ndarray) -> float:
    yg = ysign * grad
    at_upper = alpha >= box
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        return float(yg[free].mean())
    # 无自由支持向量: 取可行区间中点
    ub_mask = (at_upper & (ysign < 0)) | (at_lower & (ysign > 0))
    lb_mask = (at_upper & (ysign > 0)) | (at_lower & (ysign < 0))
    ub = float(yg[ub_mask].min()) if ub_mask.any() else np.inf
    lb = float(yg[lb_mask].max()) if lb_mask.any() else -np.inf
    return (ub + lb) / 2.0


def _fit(X: np.ndarray, y: np.ndarray, hp: Dict[str, Any], seed: int):
    gamma = resolve_gamma(hp["gamma"], X)
    prior = float(y.mean())
    if prior in (0.0, 1.0):
        # 单一类别: 常数决策值，符号即该类别
        sign = 1.0 if prior == 1.0 else -1.0
        params = {"gamma": gamma, "support_vectors": np.zeros((0, X.shape[1])), "dual_coef": np.zeros(0), "intercept": sign}
        return params, {"degenerate": True, "converged": True, "n_iter": 0}

    ysign = 2.0 * y - 1.0
    box = float(hp["C"]) * class_weights(y, hp["class_weight"])
    K = rbf_kernel(X, X, gamma)
    # 一遍 = n 次成对更新
    max_updates = int(hp["max_passes"]) * y.shape[0]
    alpha, grad, n_iter, converged = _smo(K, ysign, box, float(hp["tol"]), max_updates)
    if not converged:
        logger.warning("svm: SMO hit the cap of %d passes (%d pair updates) before reaching tol=%g", hp["max_passes"], n_iter, hp["tol"])
    rho = _rho(alpha, grad, ysign, box)
    sv = alpha > 0
    params = {
        "gamma": gamma,
        "support_vectors": X[sv].copy(),
        "dual_coef": (alpha * ysign)[sv],
        "intercept": -rho,
    }
    diagnostics = {
        "degenerate": False,
        "converged": converged,
        "n_iter": n_iter,
        "max_updates": max_updates,
        "n_support": int(sv.sum()),
        "alpha": alpha,
        "box": box,
    }
    return params, diagnostics


def _decision(params: Dict[str, Any], X: np.ndarray) -> np.ndarray:
    sv = np.asarray(params["support_vectors"])
    if sv.shape[0] == 0:
        return np.full(X.shape[0], float(params["intercept"]))
    return rbf_kernel(X, sv, float(params["gamma"])) @ np.asarray(params["dual_coef"]) + float(params["intercept"])


register(Family.SVM_RBF, FamilyImpl(fit=_fit, decision=_decision, validate=_validate, threshold=lambda params: 0.0))


def fit_svm_rbf(X, y, hp: Optional[Dict[str, Any]] = None, seed: int = 0) -> TrainedModel:
    return fit_model(ModelSpec(Family.SVM_RBF, hp or {}, seed), X, y)
