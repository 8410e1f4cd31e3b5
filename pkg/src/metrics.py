"""混淆矩阵指标、ROC/AUC 与跨折汇总。

退化情形 (分母为 0) 统一返回 0，并在 FoldMetrics.degenerate 中记录指标名，方便报告加脚注。
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from src.errors import BadLabel, EmptyInput, LengthMismatch

METRIC_NAMES: Tuple[str, ...] = (
    "auc",
    "balanced_accuracy",
    "mcc",
    "specificity",
    "sensitivity",
    "f1",
    "precision",
)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def _binary(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise LengthMismatch(f"{name} 必须是一维向量")
    if arr.size and not np.all(np.isin(arr, (0, 1))):
        raise BadLabel(f"{name} 只能包含 0/1")
    return arr.astype(np.int8)


def confusion(labels_true: Sequence[int], labels_pred: Sequence[int]) -> ConfusionCounts:
    t = _binary(labels_true, "labels_true")
    p = _binary(labels_pred, "labels_pred")
    if t.shape != p.shape:
        raise LengthMismatch(f"长度不一致: {t.size} vs {p.size}")
    return ConfusionCounts(
        tp=int(np.sum((t == 1) & (p == 1))),
        tn=int(np.sum((t == 0) & (p == 0))),
        fp=int(np.sum((t == 0) & (p == 1))),
        fn=int(np.sum((t == 1) & (p == 0))),
    )


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def specificity(c: ConfusionCounts) -> float:
    return _ratio(c.tn, c.tn + c.fp)


def sensitivity(c: ConfusionCounts) -> float:
    return _ratio(c.tp, c.tp + c.fn)


def precision(c: ConfusionCounts) -> float:
    return _ratio(c.tp, c.tp + c.fp)


def balanced_accuracy(c: ConfusionCounts) -> float:
    return (sensitivity(c) + specificity(c)) / 2


def mcc(c: ConfusionCounts) -> float:
    den = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    if den == 0:
        return 0.0
    return (c.tp * c.tn - c.fp * c.fn) / math.sqrt(den)


def f1(c: ConfusionCounts) -> float:
    prec, sens = precision(c), sensitivity(c)
    if c.tp + c.fp == 0 or prec + sens == 0:
        return 0.0
    return 2 * prec * sens / (prec + sens)


def degenerate_flags(c: ConfusionCounts) -> Tuple[str, ...]:
    flags = []
    if c.tn + c.fp == 0:
        flags.append("specificity")
    if c.tp + c.fn == 0:
        flags.append("sensitivity")
    if c.tp + c.fp == 0:
        flags.extend(["precision", "f1"])
    if (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn) == 0:
        flags.append("mcc")
    return tuple(flags)


# ================= ROC / AUC =================
def _scores_labels(scores, labels) -> Tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = _binary(labels, "labels")
    if s.shape != y.shape:
        raise LengthMismatch(f"长度不一致: {s.size} vs {y.size}")
    return s, y


def roc_curve(scores: Sequence[float], labels: Sequence[int]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """完整阈值扫描的 ROC 点列 (fpr, tpr, thresholds)，从 (0, 0) 开始"""
    s, y = _scores_labels(scores, labels)
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    # 每个不同分数取最后一个位置，保证并列分数作为一个阈值一起越过
    last = np.concatenate((np.flatnonzero(np.diff(s) != 0), [s.size - 1])) if s.size else np.array([], dtype=int)
    tps = np.cumsum(y)[last]
    fps = (last + 1) - tps
    n_pos, n_neg = int(y.sum()), int(y.size - y.sum())
    tpr = np.concatenate(([0.0], tps / n_pos if n_pos else np.zeros(len(tps))))
    fpr = np.concatenate(([0.0], fps / n_neg if n_neg else np.zeros(len(fps))))
    thresholds = np.concatenate(([np.inf], s[last]))
    return fpr, tpr, thresholds


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """梯形面积；只有一个类别时定义为 0.5"""
    s, y = _scores_labels(scores, labels)
    if y.size == 0 or y.min() == y.max():
        return 0.5
    fpr, tpr, _ = roc_curve(s, y)
    return float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2))


# ================= 单折 / 汇总 =================
@dataclass(frozen=True)
class FoldMetrics:
    auc: float
    balanced_accuracy: float
    mcc: float
    specificity: float
    sensitivity: float
    f1: float
    precision: float
    degenerate: Tuple[str, ...] = field(default_factory=tuple)

    def as_dict(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}

    def to_dict(self) -> Dict[str, object]:
        return {**self.as_dict(), "degenerate": list(self.degenerate)}

    @classmethod
    def from_dict(cls, raw: Mapping[str, object]) -> "FoldMetrics":
        return cls(**{n: float(raw[n]) for n in METRIC_NAMES}, degenerate=tuple(raw.get("degenerate", ())))


def fold_metrics(labels_true: Sequence[int], scores: Sequence[float], labels_pred: Sequence[int]) -> FoldMetrics:
    c = confusion(labels_true, labels_pred)
    y = np.asarray(labels_true)
    flags = list(degenerate_flags(c))
    if y.size == 0 or y.min() == y.max():
        flags.insert(0, "auc")
    return FoldMetrics(
        auc=roc_auc(scores, labels_true),
        balanced_accuracy=balanced_accuracy(c),
        mcc=mcc(c),
        specificity=specificity(c),
        sensitivity=sensitivity(c),
        f1=f1(c),
        precision=precision(c),
        degenerate=tuple(flags),
    )


@dataclass(frozen=True)
class MetricSummary:
    mean: Dict[str, float]
    sd: Dict[str, float]
    n_folds: int

    def to_dict(self) -> Dict[str, object]:
        return {"mean": dict(self.mean), "sd": dict(self.sd), "n_folds": self.n_folds}


def aggregate_folds(per_fold: Iterable[FoldMetrics]) -> MetricSummary:
    """算术平均与样本标准差 (n-1)；单折时 sd = 0"""
    folds: List[FoldMetrics] = list(per_fold)
    if not folds:
        raise EmptyInput("没有可汇总的折")
    mean, sd = {}, {}
    for name in METRIC_NAMES:
        values = np.array([getattr(f, name) for f in folds], dtype=np.float64)
        mean[name] = float(values.mean())
        sd[name] = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return MetricSummary(mean=mean, sd=sd, n_folds=len(folds))
