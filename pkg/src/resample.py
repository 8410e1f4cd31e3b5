"""分层 k 折划分与 (嵌套) 交叉验证。

外层每一折: 在其余 k-1 折上训练，在该折上打分与出标签，逐折计算指标。
嵌套模式下，外层训练集内部再做 k_inner 折网格搜索 (按平均 AUC 选参)，然后在完整外层训练集上重新训练。
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config import Evaluation, Family
from src.errors import BadLabel, FoldFitError, InvalidSpec, LengthMismatch, MetaboBenchError, ShapeMismatch, TooFewPerClass
from src.metrics import FoldMetrics, MetricSummary, aggregate_folds, fold_metrics
from src.models import ModelSpec, TrainedModel, fit_model, predict_labels, predict_scores
from src.preprocess import PreprocessParams, fit_preprocessor, transform
from src.utils.parallel import run_tasks
from src.utils.seeding import derive_seed, make_rng

logger = logging.getLogger(__name__)


# ================= 划分 =================
@dataclass(frozen=True)
class FoldPlan:
    k: int
    folds: Tuple[Tuple[int, ...], ...]
    seed: int = 0

    def __post_init__(self):
        folds = tuple(tuple(int(i) for i in sorted(f)) for f in self.folds)
        object.__setattr__(self, "folds", folds)
        if len(folds) != self.k or self.k < 2:
            raise InvalidSpec(f"折数 {len(folds)} 与 k={self.k} 不符 (k 至少为 2)")
        flat = [i for f in folds for i in f]
        # 各折互不相交且覆盖 0..n-1
        if sorted(flat) != list(range(len(flat))):
            raise InvalidSpec("各折必须是 0..n-1 的一个划分")

    @property
    def n_samples(self) -> int:
        return sum(len(f) for f in self.folds)

    def split(self, i: int) -> Tuple[np.ndarray, np.ndarray]:
        """第 i 折: (训练索引, 测试索引)，均为升序"""
        test = np.array(self.folds[i], dtype=np.int64)
        mask = np.ones(self.n_samples, dtype=bool)
        mask[test] = False
        return np.flatnonzero(mask), test

    def to_dict(self) -> Dict[str, Any]:
        return {"k": self.k, "seed": self.seed, "folds": [list(f) for f in self.folds]}


def _check_labels(labels: Any) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim != 1:
        raise ShapeMismatch("标签必须是一维向量")
    if not np.all(np.isin(y, (0, 1))):
        raise BadLabel("标签只能包含 0/1")
    return y.astype(np.int64)


def stratified_kfold(labels: Sequence[int], k: int, seed: int = 0) -> FoldPlan:
    """每个类别内部按种子打乱，类别 0 在前、类别 1 在后拼接，第 t 个位置分到第 t mod k 折"""
    y = _check_labels(labels)
    if isinstance(k, bool) or int(k) != k or k < 2:
        raise InvalidSpec(f"k 必须是 >= 2 的整数 (当前 {k!r})")
    k = int(k)
    for c in np.unique(y):
        count = int(np.sum(y == c))
        if count < k:
            raise TooFewPerClass(f"类别 {c} 只有 {count} 个样本，少于 k={k}")
    rng = make_rng(seed)
    order = np.concatenate([rng.permutation(np.flatnonzero(y == c)) for c in (0, 1)])
    folds = [order[t::k] for t in range(k)]
    return FoldPlan(k=k, folds=tuple(tuple(f) for f in folds), seed=int(seed))


def leave_one_out(labels: Sequence[int]) -> FoldPlan:
    y = _check_labels(labels)
    return FoldPlan(k=y.size, folds=tuple((i,) for i in range(y.size)), seed=0)


def _plan_for(y: np.ndarray, k: int, seed: int, plan: Optional[FoldPlan]) -> FoldPlan:
    if plan is None:
        plan = leave_one_out(y) if k == y.size else stratified_kfold(y, k, seed)
    if plan.n_samples != y.size:
        raise ShapeMismatch(f"划分覆盖 {plan.n_samples} 个样本，数据有 {y.size} 个")
    return plan


# ================= 结果 =================
def _plain(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


@dataclass(frozen=True, eq=False)
class FoldRecord:
    fold: int
    seed: int
    test_indices: np.ndarray
    scores: np.ndarray
    predicted: np.ndarray
    metrics: FoldMetrics
    hyperparameters: Dict[str, Any]
    # 仅调参模式
    chosen: Optional[Dict[str, Any]] = None
    grid_scores: Optional[List[float]] = None
    # keep_models 时保留，不序列化
    model: Optional[TrainedModel] = field(default=None, repr=False)
    preprocessor: Optional[PreprocessParams] = field(default=None, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        doc = {
            "fold": self.fold,
            "seed": self.seed,
            "test_indices": self.test_indices.tolist(),
            "scores": self.scores.tolist(),
            "predicted": self.predicted.tolist(),
            "metrics": self.metrics.to_dict(),
            "hyperparameters": _plain(self.hyperparameters),
        }
        if self.chosen is not None:
            doc["chosen"] = _plain(self.chosen)
            doc["grid_scores"] = list(self.grid_scores or [])
        return doc


@dataclass(frozen=True, eq=False)
class CvResult:
    family: Family
    plan: FoldPlan
    labels: np.ndarray
    records: Tuple[FoldRecord, ...]
    seed: int
    tuned: bool = False
    fold_safe: bool = False
    evaluation: Evaluation = Evaluation.PER_FOLD

    @property
    def per_fold(self) -> List[FoldMetrics]:
        return [r.metrics for r in self.records]

    def pooled(self) -> FoldMetrics:
        """所有测试折的预测合并后一次性计算指标"""
        idx = np.concatenate([r.test_indices for r in self.records])
        scores = np.concatenate([r.scores for r in self.records])
        predicted = np.concatenate([r.predicted for r in self.records])
        return fold_metrics(self.labels[idx], scores, predicted)

    def summary(self) -> MetricSummary:
        per_fold = aggregate_folds(self.per_fold)
        if self.evaluation == Evaluation.PER_FOLD:
            return per_fold
        # 合并模式: 均值来自合并预测，标准差仍取逐折
        return MetricSummary(mean=self.pooled().as_dict(), sd=per_fold.sd, n_folds=per_fold.n_folds)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": self.family.value,
            "seed": self.seed,
            "tuned": self.tuned,
            "fold_safe": self.fold_safe,
            "evaluation": self.evaluation.value,
            "plan": self.plan.to_dict(),
            "folds": [r.to_dict() for r in self.records],
            "summary": self.summary().to_dict(),
        }


# ================= 交叉验证 =================
def _check_xy(matrix: Any, labels: Any) -> Tuple[np.ndarray, np.ndarray]:
    X = np.asarray(matrix, dtype=np.float64)
    y = _check_labels(labels)
    if X.ndim != 2:
        raise ShapeMismatch(f"矩阵必须是二维 (当前 {X.ndim} 维)")
    if X.shape[0] != y.size:
        raise LengthMismatch(f"矩阵 {X.shape[0]} 行，标签 {y.size} 个")
    return X, y


def _fold_data(X: np.ndarray, plan: FoldPlan, i: int, fold_safe: bool):
    train, test = plan.split(i)
    X_train, X_test = X[train], X[test]
    params = None
    if fold_safe:
        # 只用外层训练集拟合预处理参数
        params = fit_preprocessor(X_train)
        X_train, X_test = transform(params, X_train), transform(params, X_test)
    return train, test, X_train, X_test, params


def _fit_fold(i: int, spec: ModelSpec, X_train: np.ndarray, y_train: np.ndarray) -> TrainedModel:
    try:
        return fit_model(spec, X_train, y_train)
    except (MetaboBenchError, ArithmeticError) as exc:
        raise FoldFitError(i, exc) from exc


def _evaluate(i, seed, spec, model, X_test, y, test, params, keep_models, chosen=None, grid_scores=None) -> FoldRecord:
    scores = predict_scores(model, X_test)
    predicted = predict_labels(model, X_test)
    record = FoldRecord(
        fold=i,
        seed=seed,
        test_indices=test,
        scores=scores,
        predicted=predicted,
        metrics=fold_metrics(y[test], scores, predicted),
        hyperparameters=dict(model.hyperparameters),
        chosen=chosen,
        grid_scores=grid_scores,
        model=model if keep_models else None,
        preprocessor=params if keep_models else None,
    )
    logger.debug("%s fold %d: auc=%.4f", spec.family.value, i, record.metrics.auc)
    return record


def _cv_fold(X, y, plan, i, spec, seed, fold_safe, keep_models) -> FoldRecord:
    train, test, X_train, X_test, params = _fold_data(X, plan, i, fold_safe)
    fold_seed = derive_seed(seed, i)
    model = _fit_fold(i, spec.with_seed(fold_seed), X_train, y[train])
    return _evaluate(i, fold_seed, spec, model, X_test, y, test, params, keep_models)


def run_cv(
    matrix: Any,
    labels: Any,
    model_spec: ModelSpec,
    k: int = 10,
    seed: Optional[int] = None,
    *,
    plan: Optional[FoldPlan] = None,
    fold_safe: bool = False,
    evaluation: Evaluation = Evaluation.PER_FOLD,
    threads: int = 1,
    keep_models: bool = False,
) -> CvResult:
    """k == 样本数时使用留一法；第 i 折模型种子 derive_seed(seed, i)"""
    X, y = _check_xy(matrix, labels)
    seed = int(model_spec.seed if seed is None else seed)
    plan = _plan_for(y, k, seed, plan)
    tasks = [(X, y, plan, i, model_spec, seed, fold_safe, keep_models) for i in range(plan.k)]
    records = run_tasks(_cv_fold, tasks, threads)
    return CvResult(
        family=model_spec.family,
        plan=plan,
        labels=y,
        records=tuple(records),
        seed=seed,
        tuned=False,
        fold_safe=fold_safe,
        evaluation=evaluation,
    )


def _nested_fold(X, y, plan, i, spec, grid, k_inner, seed, fold_safe, keep_models) -> FoldRecord:
    from src.tuning import grid_search

    train, test, X_train, X_test, params = _fold_data(X, plan, i, fold_safe)
    y_train = y[train]
    try:
        search = grid_search(X_train, y_train, spec.family, grid, k_inner, derive_seed(seed, i, 1), base=spec.hyperparameters)
    except TooFewPerClass:
        raise
    except (MetaboBenchError, ArithmeticError) as exc:
        raise FoldFitError(i, exc) from exc
    fold_seed = derive_seed(seed, i)
    model = _fit_fold(i, spec.with_params(**search.best).with_seed(fold_seed), X_train, y_train)
    return _evaluate(i, fold_seed, spec, model, X_test, y, test, params, keep_models, dict(search.best), list(search.scores))


def run_nested_cv(
    matrix: Any,
    labels: Any,
    model_spec: ModelSpec,
    grid: Any,
    k_outer: int = 10,
    k_inner: int = 5,
    seed: Optional[int] = None,
    *,
    plan: Optional[FoldPlan] = None,
    fold_safe: bool = False,
    evaluation: Evaluation = Evaluation.PER_FOLD,
    threads: int = 1,
    keep_models: bool = False,
) -> CvResult:
    """内层种子 derive_seed(seed, i, 1)；FOLD_SAFE 时内层复用外层训练集上拟合的变换"""
    from src.tuning import as_grid, require_axes

    X, y = _check_xy(matrix, labels)
    grid = require_axes(as_grid(model_spec.family, grid))
    seed = int(model_spec.seed if seed is None else seed)
    plan = _plan_for(y, k_outer, seed, plan)
    tasks = [(X, y, plan, i, model_spec, grid, k_inner, seed, fold_safe, keep_models) for i in range(plan.k)]
    records = run_tasks(_nested_fold, tasks, threads)
    return CvResult(
        family=model_spec.family,
        plan=plan,
        labels=y,
        records=tuple(records),
        seed=seed,
        tuned=True,
        fold_safe=fold_safe,
        evaluation=evaluation,
    )
