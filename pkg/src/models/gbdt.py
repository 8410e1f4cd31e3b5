"""二阶梯度提升树 (XGBoost 式精确贪心切分)，逻辑损失。

每轮: g = p - y, h = p(1 - p)
切分增益 = 1/2 [GL²/(HL+λ) + GR²/(HR+λ) - G²/(H+λ)] - γ，叶子权重 -G/(H+λ)
"""
from __future__ import annotations

import logging
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.special import expit

from src.config import Family
from src.models.base import FamilyImpl, ModelSpec, TrainedModel, fit_model, register, require_int, require_real
from src.models.tree import grow_tree, midpoint, predict_tree, sorted_candidates

logger = logging.getLogger(__name__)


def _validate(hp: Dict[str, Any]) -> None:
    require_int(hp, "n_rounds", 0)
    require_real(hp, "eta", 0.0, 1.0, open_low=True)
    require_real(hp, "lambda", 0.0)
    require_real(hp, "gamma", 0.0)
    require_int(hp, "max_depth", 1)


def log_loss(y: np.ndarray, margin: np.ndarray) -> float:
    # log(1 + e^m) - y m，数值稳定写法
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


def _best_split(
    X: np.ndarray, g: np.ndarray, h: np.ndarray, rows: np.ndarray, reg_lambda: float, gamma: float
) -> Optional[Tuple[int, float]]:
    if rows.size < 2:
        return None
    order, xs, valid = sorted_candidates(X[rows])
    if not valid.any():
        return None
    gs, hs = g[rows][order], h[rows][order]
    G, H = g[rows].sum(), h[rows].sum()
    GL = np.cumsum(gs, axis=0)[:-1]
    HL = np.cumsum(hs, axis=0)[:-1]
    GR, HR = G - GL, H - HL
    gain = 0.5 * (GL**2 / (HL + reg_lambda) + GR**2 / (HR + reg_lambda) - G**2 / (H + reg_lambda)) - gamma
    gain = np.where(valid, gain, -np.inf)
    r, j = np.unravel_index(int(np.argmax(gain)), gain.shape)
    if not gain[r, j] > 0:
        return None
    return int(j), midpoint(xs[r, j], xs[r + 1, j])


def _fit(X: np.ndarray, y: np.ndarray, hp: Dict[str, Any], seed: int):
    prior = float(y.mean())
    if prior in (0.0, 1.0):
        return {"prior": prior, "base_margin": 0.0, "eta": hp["eta"], "trees": []}, {"degenerate": True, "loss_history": []}

    base_margin = float(np.log(prior / (1.0 - prior)))
    margin = np.full(X.shape[0], base_margin)
    eta, reg_lambda, gamma = float(hp["eta"]), float(hp["lambda"]), float(hp["gamma"])
    rows = np.arange(X.shape[0])
    trees = []
    history = [log_loss(y, margin)]
    for _ in range(hp["n_rounds"]):
        p = expit(margin)
        g, h = p - y, p * (1.0 - p)

        def leaf_value(r: np.ndarray) -> float:
            return float(-g[r].sum() / (h[r].sum() + reg_lambda))

        def find_split(r: np.ndarray, depth: int):
            return _best_split(X, g, h, r, reg_lambda, gamma)

        tree = grow_tree(X, rows, hp["max_depth"], find_split, leaf_value)
        trees.append(tree)
        margin = margin + eta * predict_tree(tree, X)
        history.append(log_loss(y, margin))

    logger.debug("gbdt: %d rounds, final train loss %.6f", len(trees), history[-1])
    params = {"prior": prior, "base_margin": base_margin, "eta": eta, "trees": trees}
    return params, {"degenerate": False, "loss_history": history}


def margins(params: Dict[str, Any], X: np.ndarray) -> np.ndarray:
    margin = np.full(X.shape[0], float(params["base_margin"]))
    for tree in params["trees"]:
        margin += float(params["eta"]) * predict_tree(tree, X)
    return margin


def _decision(params: Dict[str, Any], X: np.ndarray) -> np.ndarray:
    if not params["trees"]:
        # 0 轮或单一类别: 分数即类别 1 先验
        return np.full(X.shape[0], float(params["prior"]))
    return expit(margins(params, X))


register(Family.GBDT, FamilyImpl(fit=_fit, decision=_decision, validate=_validate))


def fit_gbdt(X, y, hp: Optional[Dict[str, Any]] = None, seed: int = 0) -> TrainedModel:
    return fit_model(ModelSpec(Family.GBDT, hp or {}, seed), X, y)
