"""基准报告: 汇总表、一致性散点 (均值 AUC vs AUC 标准差)、逻辑回归系数排名，以及落盘。

输出文件 (都在 out_dir 下):
  report.json                      完整结果 (键排序、无时间戳，同配置重跑字节一致)
  summary_<dataset>_<mode>.csv     Model, AUC, B.A., MCC, Spec., F1
  scatter.csv / scatter.svg        dataset, model, mode, mean_auc, sd_auc
  summary.xlsx                     每个 (数据集, 模式) 一个工作表
  coefficients_<filter>.csv        order, name, coefficient
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.config import (
    MODEL_LABELS,
    MODEL_ORDER,
    REPORT_FLOAT_FORMAT,
    DatasetName,
    Family,
    RunMode,
    parse_dataset,
    parse_family,
)
from src.data import FeatureMeta, is_known_name
from src.errors import EmptyInput, MissingCell, ShapeMismatch, WrongFamily
from src.metrics import MetricSummary
from src.models import TrainedModel
from src.resample import CvResult
from src.version import APP_NAME, APP_VERSION, DOCUMENT_VERSION

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = (
    ("Model", None),
    ("AUC", "auc"),
    ("B.A.", "balanced_accuracy"),
    ("MCC", "mcc"),
    ("Spec.", "specificity"),
    ("F1", "f1"),
)
SCATTER_COLUMNS = ("dataset", "model", "mode", "mean_auc", "sd_auc")

CellKey = Tuple[DatasetName, Family, RunMode]


# ================= 基准表 =================
@dataclass(frozen=True)
class ReportLayout:
    datasets: Tuple[DatasetName, ...]
    models: Tuple[Family, ...]
    modes: Tuple[RunMode, ...]

    def keys(self) -> List[CellKey]:
        """数据集按给定顺序；模型按表格顺序 (XGB, RF, SVM, MLP, LR, K-NN, DCM, DCU)；模式按给定顺序"""
        models = [f for f in MODEL_ORDER if f in self.models]
        return [(d, f, m) for d in self.datasets for f in models for m in self.modes]


@dataclass(frozen=True, eq=False)
class ReportCell:
    dataset: DatasetName
    family: Family
    mode: RunMode
    summary: Optional[MetricSummary]
    result: Optional[CvResult]
    provenance: str = "none"
    skipped: Optional[str] = None

    @property
    def label(self) -> str:
        return MODEL_LABELS[self.family]

    def to_dict(self) -> Dict[str, Any]:
        doc: Dict[str, Any] = {
            "dataset": self.dataset.value,
            "model": self.family.value,
            "label": self.label,
            "mode": self.mode.value,
            "grid_provenance": self.provenance,
        }
        if self.skipped is not None:
            doc["skipped"] = self.skipped
            return doc
        doc["summary"] = self.summary.to_dict()
        doc["cv"] = self.result.to_dict()
        return doc


@dataclass(frozen=True, eq=False)
class BenchmarkReport:
    layout: ReportLayout
    cells: Tuple[ReportCell, ...]
    config: Dict[str, Any] = field(default_factory=dict)
    dataset_info: Dict[str, Dict[str, int]] = field(default_factory=dict)

    def cell(self, dataset: Any, family: Any, mode: RunMode) -> ReportCell:
        key = (parse_dataset(dataset), parse_family(family), RunMode(mode))
        for c in self.cells:
            if (c.dataset, c.family, c.mode) == key:
                return c
        raise MissingCell(f"报告中没有 {key[0].value}/{key[1].value}/{key[2].value}")

    def rows(self, dataset: Any, mode: RunMode) -> List[ReportCell]:
        dataset = parse_dataset(dataset)
        return [c for c in self.cells if c.dataset == dataset and c.mode == mode and c.skipped is None]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "app": APP_NAME,
            "version": APP_VERSION,
            "document_version": DOCUMENT_VERSION,
            "config": self.config,
            "dataset_info": self.dataset_info,
            "layout": {
                "datasets": [d.value for d in self.layout.datasets],
                "models": [f.value for f in self.layout.models],
                "modes": [m.value for m in self.layout.modes],
            },
            "cells": [c.to_dict() for c in self.cells],
            "scatter": [p.to_dict() for p in consistency_scatter(self)],
        }


def build_report(
    results: Mapping[CellKey, CvResult],
    layout: Optional[ReportLayout] = None,
    *,
    skipped: Optional[Mapping[CellKey, str]] = None,
    provenance: Optional[Mapping[Family, str]] = None,
    config: Optional[Mapping[str, Any]] = None,
    dataset_info: Optional[Mapping[str, Mapping[str, int]]] = None,
) -> BenchmarkReport:
    skipped = dict(skipped or {})
    if not results and not skipped:
        raise EmptyInput("没有可汇总的结果")
    if layout is None:
        keys = list(results) + list(skipped)
        layout = ReportLayout(
            datasets=tuple(d for d in DatasetName if any(k[0] == d for k in keys)),
            models=tuple(f for f in MODEL_ORDER if any(k[1] == f for k in keys)),
            modes=tuple(m for m in RunMode if any(k[2] == m for k in keys)),
        )
    provenance = dict(provenance or {})

    cells = []
    for key in layout.keys():
        dataset, family, mode = key
        prov = provenance.get(family, "none") if mode == RunMode.TUNED else "none"
        if key in results:
            result = results[key]
            cells.append(ReportCell(dataset, family, mode, result.summary(), result, prov))
        elif key in skipped:
            cells.append(ReportCell(dataset, family, mode, None, None, prov, skipped=skipped[key]))
        else:
            raise MissingCell(f"缺少结果: {dataset.value}/{family.value}/{mode.value}")
    return BenchmarkReport(
        layout=layout,
        cells=tuple(cells),
        config=dict(config or {}),
        dataset_info={k: dict(v) for k, v in (dataset_info or {}).items()},
    )


def summary_frame(report: BenchmarkReport, dataset: Any, mode: RunMode) -> pd.DataFrame:
    rows = []
    for c in report.rows(dataset, mode):
        rows.append([c.label] + [c.summary.mean[metric] for _, metric in SUMMARY_COLUMNS[1:]])
    return pd.DataFrame(rows, columns=[name for name, _ in SUMMARY_COLUMNS])


# ================= 一致性散点 =================
@dataclass(frozen=True)
class ScatterPoint:
    dataset: str
    model: str
    mode: str
    mean_auc: float
    sd_auc: float

    def to_dict(self) -> Dict[str, Any]:
        return {name: getattr(self, name) for name in SCATTER_COLUMNS}


def consistency_scatter(report: BenchmarkReport) -> List[ScatterPoint]:
    """每个 (数据集, 模型, 模式) 一个点: (均值 AUC, AUC 标准差)"""
    return [
        ScatterPoint(c.dataset.value, c.label, c.mode.value, float(c.summary.mean["auc"]), float(c.summary.sd["auc"]))
        for c in report.cells
        if c.skipped is None
    ]


def scatter_frame(points: Sequence[ScatterPoint]) -> pd.DataFrame:
    return pd.DataFrame([p.to_dict() for p in points], columns=list(SCATTER_COLUMNS))


def _plot_scatter(points: Sequence[ScatterPoint], path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # 固定 SVG 内部 id，保证输出可复现
    plt.rcParams["svg.hashsalt"] = APP_NAME
    datasets = list(dict.fromkeys(p.dataset for p in points))
    fig, axes = plt.subplots(1, len(datasets), figsize=(4.5 * len(datasets), 4), squeeze=False, sharey=True)
    for ax, dataset in zip(axes[0], datasets):
        for p in (q for q in points if q.dataset == dataset):
            # 浅色 = 未调参，深色 = 调参后
            ax.scatter(p.sd_auc, p.mean_auc, color="tab:blue", alpha=0.4 if p.mode == RunMode.BASE.value else 1.0)
            ax.annotate(p.model, (p.sd_auc, p.mean_auc), fontsize=7, xytext=(3, 3), textcoords="offset points")
        ax.set_title(dataset)
        ax.set_xlabel("AUC SD")
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel("mean AUC")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# ================= 系数排名 =================
class CoefficientFilter(str, Enum):
    ALL = "ALL"
    KNOWN_ONLY = "KNOWN_ONLY"


@dataclass(frozen=True)
class CoefficientReport:
    entries: Tuple[Tuple[str, float], ...]
    filter: CoefficientFilter
    source: Dict[str, Any] = field(default_factory=dict)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(i + 1, name, coef) for i, (name, coef) in enumerate(self.entries)],
            columns=["order", "name", "coefficient"],
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "filter": self.filter.value,
            "entries": [{"name": n, "coefficient": c} for n, c in self.entries],
            "source": self.source,
        }


def _feature_entry(feature: Union[FeatureMeta, str]) -> Tuple[str, bool]:
    if isinstance(feature, FeatureMeta):
        name = feature.display_name()
        return name, feature.known and is_known_name(feature.name)
    return str(feature), is_known_name(str(feature))


def rank_coefficients(
    model: TrainedModel,
    features: Sequence[Union[FeatureMeta, str]],
    top_n: int = 10,
    filter: CoefficientFilter = CoefficientFilter.ALL,
    source: Optional[Mapping[str, Any]] = None,
) -> CoefficientReport:
    """按 |系数| 降序取前 top_n，保留符号；|系数| 相同按名称字典序"""
    if model.family != Family.LOGISTIC_RIDGE:
        raise WrongFamily(f"系数排名只适用于逻辑回归 (当前 {model.family.value})")
    coef = np.asarray(model.params["coef"], dtype=np.float64)
    if len(features) != coef.size:
        raise ShapeMismatch(f"特征数 {len(features)} 与系数个数 {coef.size} 不一致")
    filter = CoefficientFilter(filter)

    entries = []
    for feature, c in zip(features, coef):
        name, known = _feature_entry(feature)
        if filter == CoefficientFilter.KNOWN_ONLY and not known:
            continue
        entries.append((name, float(c)))
    entries.sort(key=lambda e: (-abs(e[1]), e[0]))
    doc = dict(source) if source is not None else {"family": model.family.value, "hyperparameters": dict(model.hyperparameters), "seed": model.seed}
    return CoefficientReport(entries=tuple(entries[:top_n]), filter=filter, source=doc)


# ================= 落盘 =================
def _dump_json(doc: Any, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True, allow_nan=False, ensure_ascii=False)
        fh.write("\n")


def _write_csv(frame: pd.DataFrame, path: str) -> None:
    frame.to_csv(path, index=False, float_format=REPORT_FLOAT_FORMAT, lineterminator="\n")


def write_report(report: BenchmarkReport, out_dir: str, *, svg: bool = False, excel: bool = True) -> List[str]:
    """写出全部报告文件，返回写出的路径列表"""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    path = os.path.join(out_dir, "report.json")
    _dump_json(report.to_dict(), path)
    written.append(path)

    sheets = {}
    for dataset in report.layout.datasets:
        for mode in report.layout.modes:
            frame = summary_frame(report, dataset, mode)
            path = os.path.join(out_dir, f"summary_{dataset.slug}_{mode.value.lower()}.csv")
            _write_csv(frame, path)
            written.append(path)
            sheets[f"{dataset.slug}_{mode.value.lower()}"] = frame

    points = consistency_scatter(report)
    path = os.path.join(out_dir, "scatter.csv")
    _write_csv(scatter_frame(points), path)
    written.append(path)

    if report.dataset_info:
        info = pd.DataFrame([{"dataset": k, **v} for k, v in report.dataset_info.items()])
        path = os.path.join(out_dir, "dataset_info.csv")
        _write_csv(info, path)
        written.append(path)

    if svg and points:
        path = os.path.join(out_dir, "scatter.svg")
        _plot_scatter(points, path)
        written.append(path)

    if excel:
        path = os.path.join(out_dir, "summary.xlsx")
        with pd.ExcelWriter(path, engine="xlsxwriter") as writer:
            for name, frame in sheets.items():
                frame.to_excel(writer, sheet_name=name, index=False)
            scatter_frame(points).to_excel(writer, sheet_name="scatter", index=False)
        written.append(path)

    logger.info("report written to %s (%d files)", out_dir, len(written))
    return written


def write_coefficients(reports: Union[CoefficientReport, Iterable[CoefficientReport]], out_dir: str) -> List[str]:
    if isinstance(reports, CoefficientReport):
        reports = [reports]
    reports = list(reports)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for rep in reports:
        path = os.path.join(out_dir, f"coefficients_{rep.filter.value.lower()}.csv")
        _write_csv(rep.frame(), path)
        written.append(path)
    path = os.path.join(out_dir, "coefficients.json")
    _dump_json({rep.filter.value: rep.to_dict() for rep in reports}, path)
    written.append(path)
    return written


def read_scatter_csv(path: str) -> List[ScatterPoint]:
    frame = pd.read_csv(path, dtype={"dataset": str, "model": str, "mode": str})
    return [ScatterPoint(r.dataset, r.model, r.mode, float(r.mean_auc), float(r.sd_auc)) for r in frame.itertuples(index=False)]
