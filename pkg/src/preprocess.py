"""log2 标准化 + 分位数归一化。

标准化:  x̂_ij = (log2(x_ij) - mean_j) / sd_j   (按特征, sd 用 n-1)
分位数:  每个样本第 r 小的值替换为参考向量第 r 个值 (参考 = 训练样本排序后逐秩取均值)
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.config import REPORT_FLOAT_FORMAT, PreprocessMode
from src.data import MetaboliteTable
from src.errors import EmptyInput, NonPositiveIntensity, ShapeMismatch

logger = logging.getLogger(__name__)

TableLike = Union[MetaboliteTable, np.ndarray]


@dataclass(frozen=True, eq=False)
class PreprocessParams:
    means: np.ndarray
    sds: np.ndarray
    reference: np.ndarray
    fitted_on: int

    @property
    def n_features(self) -> int:
        return self.means.shape[0]


def _raw(table: TableLike) -> np.ndarray:
    values = table.values if isinstance(table, MetaboliteTable) else np.asarray(table, dtype=np.float64)
    if values.ndim != 2:
        raise ShapeMismatch(f"需要二维矩阵 (当前 {values.ndim} 维)")
    return values


def _log2(values: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(values) & (values > 0)):
        raise NonPositiveIntensity("log2 要求所有强度为有限正数")
    return np.log2(values)


def _standardize_log(logged: np.ndarray, means: np.ndarray, sds: np.ndarray) -> np.ndarray:
    out = np.zeros_like(logged)
    ok = sds > 0
    # sd = 0 的列输出 0，保持列序号不变
    out[:, ok] = (logged[:, ok] - means[ok]) / sds[ok]
    return out


def reference_quantiles(matrix: np.ndarray) -> np.ndarray:
    """逐秩均值：每行排序后按列取平均"""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape[0] == 0:
        raise EmptyInput("空矩阵无法计算参考分位数")
    return np.sort(matrix, axis=1).mean(axis=0)


def quantile_normalize(matrix: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """按秩映射到参考向量；并列值取所占参考位置的均值"""
    matrix = np.asarray(matrix, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != reference.shape[0]:
        raise ShapeMismatch(f"行长度 {matrix.shape[-1]} 与参考向量长度 {reference.shape[0]} 不一致")
    p = reference.shape[0]
    csum = np.concatenate(([0.0], np.cumsum(reference)))
    out = np.empty_like(matrix)
    for i, row in enumerate(matrix):
        order = np.argsort(row, kind="stable")
        sorted_row = row[order]
        mapped = reference.copy()
        # 并列段 [start, end) 统一取参考均值
        breaks = np.flatnonzero(np.diff(sorted_row) != 0) + 1
        starts = np.concatenate(([0], breaks))
        ends = np.concatenate((breaks, [p]))
        for s, e in zip(starts[ends - starts > 1], ends[ends - starts > 1]):
            mapped[s:e] = (csum[e] - csum[s]) / (e - s)
        out[i, order] = mapped
    return out


def fit_preprocessor(train: TableLike) -> PreprocessParams:
    values = _raw(train)
    n = values.shape[0]
    if n == 0 or values.shape[1] == 0:
        raise EmptyInput("训练表为空")
    logged = _log2(values)
    means = logged.mean(axis=0)
    sds = logged.std(axis=0, ddof=1) if n > 1 else np.zeros(values.shape[1])
    reference = reference_quantiles(_standardize_log(logged, means, sds))
    for arr in (means, sds, reference):
        arr.setflags(write=False)
    n_const = int(np.sum(sds == 0))
    if n_const:
        logger.debug("%d constant features map to 0", n_const)
    return PreprocessParams(means=means, sds=sds, reference=reference, fitted_on=n)


def standardize(params: PreprocessParams, table: TableLike) -> np.ndarray:
    values = _raw(table)
    if values.shape[1] != params.n_features:
        raise ShapeMismatch(f"特征数 {values.shape[1]} 与拟合时的 {params.n_features} 不一致")
    return _standardize_log(_log2(values), params.means, params.sds)


def transform(params: PreprocessParams, table: TableLike) -> np.ndarray:
    return quantile_normalize(standardize(params, table), params.reference)


def preprocess_global(table: TableLike) -> np.ndarray:
    """在交叉验证之前用全部样本拟合 (测试折参与了拟合，结果偏乐观)"""
    return transform(fit_preprocessor(table), table)


def preprocess_for_mode(table: TableLike, mode: PreprocessMode) -> np.ndarray:
    """GLOBAL 返回已变换矩阵；FOLD_SAFE 返回原始强度，由交叉验证逐折拟合"""
    if mode == PreprocessMode.GLOBAL:
        return preprocess_global(table)
    return np.array(_raw(table), dtype=np.float64)


def write_matrix_csv(
    matrix: np.ndarray,
    path: str,
    row_ids: Optional[Sequence[str]] = None,
    column_names: Optional[Sequence[str]] = None,
) -> None:
    frame = pd.DataFrame(matrix, columns=list(column_names) if column_names is not None else None)
    if row_ids is not None:
        frame.insert(0, "sample_id", list(row_ids))
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame.to_csv(path, index=False, float_format=REPORT_FLOAT_FORMAT, lineterminator="\n")
