"""k 近邻: 分数为 k 个欧氏最近邻中类别 1 的比例，距离相同取训练索引较小者。"""
from __future__ import annotations

from typing import Any, Dict, Optional

import numpy as np
from scipy.spatial.distance import cdist

from src.config import Family
from src.errors import InvalidSpec
from src.models.base import FamilyImpl, ModelSpec, TrainedModel, fit_model, register, require_int


def _validate(hp: Dict[str, Any]) -> None:
    require_int(hp, "k", 1)


def _fit(X: np.ndarray, y: np.ndarray, hp: Dict[str, Any], seed: int):
    if hp["k"] > X.shape[0]:
        raise InvalidSpec(f"k={hp['k']} 大于训练样本数 {X.shape[0]}")
    return {"k": int(hp["k"]), "X": X.copy(), "y": y.astype(np.int8)}, {}


def neighbors(params: Dict[str, Any], X: np.ndarray) -> np.ndarray:
    d = cdist(X, np.asarray(params["X"], dtype=np.float64), "sqeuclidean")
    # 稳定排序保证并列时索引小者在前
    return np.argsort(d, axis=1, kind="stable")[:, : int(params["k"])]


def _decision(params: Dict[str, Any], X: np.ndarray) -> np.ndarray:
    return np.asarray(params["y"], dtype=np.float64)[neighbors(params, X)].mean(axis=1)


register(Family.KNN, FamilyImpl(fit=_fit, decision=_decision, validate=_validate))


def fit_knn(X, y, hp: Optional[Dict[str, Any]] = None, seed: int = 0) -> TrainedModel:
    return fit_model(ModelSpec(Family.KNN, hp or {}, seed), X, y)
