"""忽略输入的基线分类器 (DCM / DCU)。"""
from __future__ import annotations

from typing import Any, Dict, Optional

import numpy as np

from src.config import Family
from src.models.base import FamilyImpl, ModelSpec, TrainedModel, fit_model, register, require_choice


def _fit(X: np.ndarray, y: np.ndarray, hp: Dict[str, Any], seed: int):
    prior = float(y.mean())
    # 众数类别，平票取 1
    mode = 1 if prior >= 0.5 else 0
    return {"strategy": hp["strategy"], "prior": prior, "mode": mode}, {}


def _most_frequent_scores(params: Dict[str, Any], X: np.ndarray) -> np.ndarray:
    return np.full(X.shape[0], float(params["prior"]))


def _most_frequent_threshold(params: Dict[str, Any]) -> float:
    # 常数分数配合该阈值，标签恒为众数类别
    return 0.0 if params["mode"] == 1 else 1.0


def _uniform_scores(params: Dict[str, Any], X: np.ndarray) -> np.ndarray:
    return np.full(X.shape[0], 0.5)


def _uniform_labels(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    rng = np.random.default_rng(model.seed)
    return rng.integers(0, 2, size=X.shape[0])


register(
    Family.DUMMY_MOST_FREQUENT,
    FamilyImpl(
        fit=_fit,
        decision=_most_frequent_scores,
        validate=lambda hp: require_choice(hp, "strategy", ("most_frequent",)),
        threshold=_most_frequent_threshold,
    ),
)
register(
    Family.DUMMY_UNIFORM,
    FamilyImpl(
        fit=_fit,
        decision=_uniform_scores,
        validate=lambda hp: require_choice(hp, "strategy", ("uniform",)),
        labels=_uniform_labels,
    ),
)


def fit_dummy(X, y, hp: Optional[Dict[str, Any]] = None, seed: int = 0) -> TrainedModel:
    hp = dict(hp or {})
    family = Family.DUMMY_UNIFORM if hp.get("strategy") == "uniform" else Family.DUMMY_MOST_FREQUENT
    return fit_model(ModelSpec(family, hp, seed), X, y)
