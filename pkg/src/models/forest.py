"""随机森林: 自助采样 + 每个节点随机 mtry 个特征 + Gini 切分的 CART。"""
from __future__ import annotations

import math
from typing import Any, Dict, Optional, Tuple

import numpy as np

from src.config import Family
from src.models.base import FamilyImpl, ModelSpec, TrainedModel, fit_model, register, require_int, require_choice
from src.models.tree import grow_tree, midpoint, n_leaves, predict_tree, sorted_candidates
from src.utils.seeding import derive_seed


def _validate(hp: Dict[str, Any]) -> None:
    require_int(hp, "n_trees", 1)
    require_int(hp, "max_depth", 1, allow_none=True)
    require_int(hp, "min_leaf", 1)
    require_choice(hp, "bootstrap", (True, False))
    if hp["mtry"] != "sqrt":
        require_int(hp, "mtry", 1)


def resolve_mtry(mtry: Any, p: int) -> int:
    if mtry == "sqrt":
        return max(1, int(math.isqrt(p)))
    return min(int(mtry), p)


def _gini_split(X: np.ndarray, y: np.ndarray, rows: np.ndarray, features: np.ndarray, min_leaf: int) -> Optional[Tuple[int, float]]:
    m = rows.size
    yn = y[rows]
    pos = int(yn.sum())
    if m < 2 * min_leaf or pos == 0 or pos == m:
        return None
    Xn = X[np.ix_(rows, features)]
    order, xs, valid = sorted_candidates(Xn, min_leaf)
    if not valid.any():
        return None
    left_pos = np.cumsum(yn[order], axis=0)[:-1].astype(np.float64)
    left_n = np.arange(1, m, dtype=np.float64)[:, None]
    right_pos = pos - left_pos
    right_n = m - left_n
    # 加权 Gini = sum_child 2 * pos * (n - pos) / n，再除以 m (对比较无影响，省略)
    impurity = 2 * left_pos * (left_n - left_pos) / left_n + 2 * right_pos * (right_n - right_pos) / right_n
    impurity = np.where(valid, impurity, np.inf)
    r, j = np.unravel_index(int(np.argmin(impurity)), impurity.shape)
    return int(features[j]), midpoint(xs[r, j], xs[r + 1, j])


def _grow(X: np.ndarray, y: np.ndarray, hp: Dict[str, Any], seed: int) -> Dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    n, p = X.shape
    rows = rng.integers(0, n, size=n) if hp["bootstrap"] else np.arange(n)
    mtry = resolve_mtry(hp["mtry"], p)

    def find_split(node_rows: np.ndarray, depth: int):
        features = np.sort(rng.choice(p, size=mtry, replace=False)) if mtry < p else np.arange(p)
        return _gini_split(X, y, node_rows, features, hp["min_leaf"])

    return grow_tree(X, rows, hp["max_depth"], find_split, lambda r: float(y[r].mean()))


def _fit(X: np.ndarray, y: np.ndarray, hp: Dict[str, Any], seed: int):
    prior = float(y.mean())
    if prior in (0.0, 1.0):
        # 单一类别: 只保留先验
        return {"prior": prior, "trees": []}, {"degenerate": True}
    # 每棵树使用派生种子，与建树顺序/并行无关
    trees = [_grow(X, y, hp, derive_seed(seed, t)) for t in range(hp["n_trees"])]
    return {"prior": prior, "trees": trees}, {"degenerate": False, "mean_leaves": float(np.mean([n_leaves(t) for t in trees]))}


def _decision(params: Dict[str, Any], X: np.ndarray) -> np.ndarray:
    trees = params["trees"]
    if not trees:
        return np.full(X.shape[0], float(params["prior"]))
    total = np.zeros(X.shape[0])
    for tree in trees:
        total += predict_tree(tree, X)
    return total / len(trees)


register(Family.RANDOM_FOREST, FamilyImpl(fit=_fit, decision=_decision, validate=_validate))


def fit_random_forest(X, y, hp: Optional[Dict[str, Any]] = None, seed: int = 0) -> TrainedModel:
    return fit_model(ModelSpec(Family.RANDOM_FOREST, hp or {}, seed), X, y)

