"""网格搜索: 所有配置共用同一组内层折，按平均 AUC 选最优，平分时取枚举顺序靠前者。"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src.config import DEFAULT_GRIDS, DEFAULT_HYPERPARAMETERS, Family, parse_family
from src.errors import EmptyGrid, InvalidSpec
from src.metrics import roc_auc
from src.models import ModelSpec, fit_model, predict_scores
from src.resample import FoldPlan, stratified_kfold
from src.utils.parallel import run_tasks
from src.utils.seeding import derive_seed

logger = logging.getLogger(__name__)

Axes = Sequence[Tuple[str, Sequence[Any]]]


@dataclass(frozen=True)
class HyperGrid:
    family: Family
    axes: Tuple[Tuple[str, Tuple[Any, ...]], ...] = ()

    def __post_init__(self):
        family = parse_family(self.family)
        object.__setattr__(self, "family", family)
        axes = tuple((str(name), tuple(values)) for name, values in self.axes)
        object.__setattr__(self, "axes", axes)
        names = [name for name, _ in axes]
        if len(set(names)) != len(names):
            raise InvalidSpec(f"{family.value} 网格中有重复的轴: {names}")
        unknown = set(names) - set(DEFAULT_HYPERPARAMETERS[family])
        if unknown:
            raise InvalidSpec(f"{family.value} 网格含有不支持的超参数: {sorted(unknown)}")
        for name, values in axes:
            if not values:
                raise EmptyGrid(f"{family.value} 网格的 {name} 轴为空")

    @property
    def size(self) -> int:
        return int(np.prod([len(v) for _, v in self.axes], dtype=np.int64))

    def configurations(self) -> List[Dict[str, Any]]:
        """笛卡尔积: 轴按声明顺序，值按声明顺序，最后一个轴变化最快；无轴时只有一个空配置"""
        names = [name for name, _ in self.axes]
        return [dict(zip(names, combo)) for combo in itertools.product(*(values for _, values in self.axes))]

    def to_dict(self) -> Dict[str, Any]:
        return {"family": self.family.value, "axes": [[name, list(values)] for name, values in self.axes]}


def require_axes(grid: HyperGrid) -> HyperGrid:
    """调参必须至少有一个轴；空网格等于未调参，直接报错"""
    if not grid.axes:
        raise EmptyGrid(f"{grid.family.value} 没有可搜索的超参数网格")
    return grid


def default_grid(family: Family) -> HyperGrid:
    family = parse_family(family)
    return HyperGrid(family, tuple((name, tuple(values)) for name, values in DEFAULT_GRIDS[family]))


def as_grid(family: Family, grid: Union[HyperGrid, Axes, Mapping[str, Sequence[Any]], None]) -> HyperGrid:
    family = parse_family(family)
    if grid is None:
        return default_grid(family)
    if isinstance(grid, HyperGrid):
        if grid.family != family:
            raise InvalidSpec(f"网格属于 {grid.family.value}，模型是 {family.value}")
        return grid
    items = grid.items() if isinstance(grid, Mapping) else grid
    return HyperGrid(family, tuple((name, tuple(values)) for name, values in items))


@dataclass(frozen=True)
class GridSearchResult:
    grid: HyperGrid
    configurations: Tuple[Dict[str, Any], ...]
    scores: Tuple[float, ...]
    best_index: int
    plan: FoldPlan

    @property
    def best(self) -> Dict[str, Any]:
        return dict(self.configurations[self.best_index])

    @property
    def best_score(self) -> float:
        return self.scores[self.best_index]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "grid": self.grid.to_dict(),
            "scores": [{"hyperparameters": dict(c), "mean_auc": s} for c, s in zip(self.configurations, self.scores)],
            "best_index": self.best_index,
        }


def _inner_auc(X, y, plan: FoldPlan, j: int, spec: ModelSpec) -> float:
    train, val = plan.split(j)
    model = fit_model(spec, X[train], y[train])
    return roc_auc(predict_scores(model, X[val]), y[val])


def grid_search(
    X_train: Any,
    y_train: Any,
    family: Family,
    grid: Union[HyperGrid, Axes, Mapping[str, Sequence[Any]], None] = None,
    k_inner: int = 5,
    seed: int = 0,
    *,
    base: Optional[Mapping[str, Any]] = None,
    threads: int = 1,
) -> GridSearchResult:
    """所有配置共用 stratified_kfold(y, k_inner, seed)；第 j 个内层折的模型种子 derive_seed(seed, j)"""
    family = parse_family(family)
    grid = as_grid(family, grid)
    require_axes(grid)
    X = np.asarray(X_train, dtype=np.float64)
    y = np.asarray(y_train).astype(np.int64)
    plan = stratified_kfold(y, k_inner, seed)

    configs = grid.configurations()
    # 先构造全部规格，非法配置在训练前报错
    specs = [[ModelSpec(family, {**(base or {}), **c}, derive_seed(seed, j)) for j in range(plan.k)] for c in configs]
    tasks = [(X, y, plan, j, specs[ci][j]) for ci in range(len(configs)) for j in range(plan.k)]
    aucs = np.array(run_tasks(_inner_auc, tasks, threads), dtype=np.float64).reshape(len(configs), plan.k)
    scores = tuple(float(row.mean()) for row in aucs)

    best_index = int(np.argmax(scores))
    logger.debug("grid search %s: best %s (mean auc %.4f) of %d configs", family.value, configs[best_index], scores[best_index], len(configs))
    return GridSearchResult(grid=grid, configurations=tuple(configs), scores=scores, best_index=best_index, plan=plan)
