"""模型统一契约: ModelSpec -> fit -> TrainedModel -> scores / labels。"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Mapping, Optional, Tuple

import numpy as np

from src.config import DEFAULT_HYPERPARAMETERS, Family, parse_family
from src.errors import BadLabel, InvalidSpec, NonFiniteInput, ShapeMismatch
from src.version import DOCUMENT_VERSION

logger = logging.getLogger(__name__)

FitFn = Callable[[np.ndarray, np.ndarray, Dict[str, Any], int], Tuple[Dict[str, Any], Dict[str, Any]]]
DecisionFn = Callable[[Dict[str, Any], np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FamilyImpl:
    fit: FitFn
    decision: DecisionFn
    validate: Callable[[Dict[str, Any]], None]
    threshold: Callable[[Dict[str, Any]], float] = lambda params: 0.5
    # 不按阈值出标签的族 (uniform 哑分类器) 提供自己的实现
    labels: Optional[Callable[["TrainedModel", np.ndarray], np.ndarray]] = None


_REGISTRY: Dict[Family, FamilyImpl] = {}


def register(family: Family, impl: FamilyImpl) -> None:
    _REGISTRY[family] = impl


def _impl(family: Family) -> FamilyImpl:
    try:
        return _REGISTRY[family]
    except KeyError:
        raise InvalidSpec(f"模型族未注册: {family}") from None


def resolve_hyperparameters(family: Family, hyperparameters: Mapping[str, Any]) -> Dict[str, Any]:
    defaults = DEFAULT_HYPERPARAMETERS[family]
    unknown = set(hyperparameters) - set(defaults)
    if unknown:
        raise InvalidSpec(f"{family.value} 不支持的超参数: {sorted(unknown)}")
    resolved = {**defaults, **hyperparameters}
    _impl(family).validate(resolved)
    return resolved


# ---- 校验小工具，供各模型族的 validate 使用 ----
def require_int(hp: Mapping[str, Any], name: str, minimum: int, allow_none: bool = False) -> None:
    v = hp[name]
    if v is None and allow_none:
        return
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < minimum:
        raise InvalidSpec(f"{name} 必须是 >= {minimum} 的整数 (当前 {v!r})")


def require_real(hp: Mapping[str, Any], name: str, low: float, high: float = math.inf, *, open_low: bool = False) -> None:
    v = hp[name]
    if isinstance(v, bool) or not isinstance(v, (int, float, np.integer, np.floating)) or not math.isfinite(v):
        raise InvalidSpec(f"{name} 必须是实数 (当前 {v!r})")
    if (v <= low if open_low else v < low) or v > high:
        bracket = "(" if open_low else "["
        raise InvalidSpec(f"{name} 必须在 {bracket}{low}, {high}] 内 (当前 {v!r})")


def require_choice(hp: Mapping[str, Any], name: str, choices: Tuple[Any, ...], err=InvalidSpec) -> None:
    if hp[name] not in choices:
        raise err(f"{name} 必须是 {choices} 之一 (当前 {hp[name]!r})")


def class_weights(y: np.ndarray, class_weight: Optional[str]) -> np.ndarray:
    """None -> 全 1；balanced -> n / (2 * n_class(i))"""
    if class_weight is None:
        return np.ones(y.shape[0])
    n = y.shape[0]
    counts = np.bincount(y, minlength=2).astype(np.float64)
    return n / (2.0 * counts[y])


# ================= 规格与训练结果 =================
@dataclass(frozen=True)
class ModelSpec:
    family: Family
    hyperparameters: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", parse_family(self.family))
        object.__setattr__(self, "hyperparameters", dict(self.hyperparameters))
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidSpec(f"seed 必须是 64 位无符号整数: {self.seed}")
        resolve_hyperparameters(self.family, self.hyperparameters)

    def resolved(self) -> Dict[str, Any]:
        return resolve_hyperparameters(self.family, self.hyperparameters)

    def with_params(self, **hyperparameters: Any) -> "ModelSpec":
        return ModelSpec(self.family, {**self.hyperparameters, **hyperparameters}, self.seed)

    def with_seed(self, seed: int) -> "ModelSpec":
        return ModelSpec(self.family, self.hyperparameters, seed)


@dataclass(frozen=True, eq=False)
class TrainedModel:
    family: Family
    hyperparameters: Dict[str, Any]
    params: Dict[str, Any]
    n_features: int
    threshold: float
    seed: int
    diagnostics: Dict[str, Any] = field(default_factory=dict)


def check_xy(X: Any, y: Any) -> Tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ShapeMismatch(f"X 必须是二维矩阵 (当前 {X.ndim} 维)")
    if y.shape != (X.shape[0],):
        raise ShapeMismatch(f"y 长度 {y.size} 与 X 行数 {X.shape[0]} 不一致")
    if X.shape[0] == 0:
        raise ShapeMismatch("训练集为空")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("X 含有 NaN 或无穷值")
    if not np.all(np.isin(y, (0, 1))):
        raise BadLabel("y 只能包含 0/1")
    return X, y.astype(np.int64)


def fit_model(spec: ModelSpec, X: Any, y: Any) -> TrainedModel:
    X, y = check_xy(X, y)
    hp = spec.resolved()
    impl = _impl(spec.family)
    params, diagnostics = impl.fit(X, y, hp, int(spec.seed))
    return TrainedModel(
        family=spec.family,
        hyperparameters=hp,
        params=params,
        n_features=X.shape[1],
        threshold=float(impl.threshold(params)),
        seed=int(spec.seed),
        diagnostics=diagnostics,
    )


def _check_query(model: TrainedModel, X: Any) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ShapeMismatch(f"特征数 {X.shape[-1]} 与模型的 {model.n_features} 不一致")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("X 含有 NaN 或无穷值")
    return X


def predict_scores(model: TrainedModel, X: Any) -> np.ndarray:
    X = _check_query(model, X)
    scores = np.asarray(_impl(model.family).decision(model.params, X), dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise NonFiniteInput(f"{model.family.value} 产生了非有限分数")
    return scores


def predict_labels(model: TrainedModel, X: Any) -> np.ndarray:
    X = _check_query(model, X)
    impl = _impl(model.family)
    if impl.labels is not None:
        return impl.labels(model, X).astype(np.int8)
    return (predict_scores(model, X) >= model.threshold).astype(np.int8)


# ================= JSON 序列化 =================
def _encode(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.tolist(), "dtype": str(obj.dtype), "shape": list(obj.shape)}
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _decode(obj: Any) -> Any:
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            return np.array(obj["__ndarray__"], dtype=obj["dtype"]).reshape(obj["shape"])
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def model_to_dict(model: TrainedModel) -> Dict[str, Any]:
    return {
        "format": "metabobench-model",
        "version": DOCUMENT_VERSION,
        "family": model.family.value,
        "hyperparameters": _encode(model.hyperparameters),
        "params": _encode(model.params),
        "n_features": model.n_features,
        "threshold": model.threshold,
        "seed": model.seed,
        "diagnostics": _encode(model.diagnostics),
    }


def model_from_dict(doc: Mapping[str, Any]) -> TrainedModel:
    if doc.get("format") != "metabobench-model":
        raise InvalidSpec("不是模型文档")
    if doc.get("version") != DOCUMENT_VERSION:
        raise InvalidSpec(f"不支持的模型文档版本: {doc.get('version')}")
    family = parse_family(doc["family"])
    return TrainedModel(
        family=family,
        hyperparameters=resolve_hyperparameters(family, _decode(doc["hyperparameters"])),
        params=_decode(doc["params"]),
        n_features=int(doc["n_features"]),
        threshold=float(doc["threshold"]),
        seed=int(doc["seed"]),
        diagnostics=_decode(doc.get("diagnostics", {})),
    )


def save_model(model: TrainedModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=1, sort_keys=True, allow_nan=False)


def load_model(path: str) -> TrainedModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
