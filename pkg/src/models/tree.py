"""随机森林与梯度提升共用的二叉树结构 (数组形式，便于序列化)。"""
from __future__ import annotations

from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

LEAF = -1

# find_split(rows, depth) -> None 或 (feature, threshold)
SplitFinder = Callable[[np.ndarray, int], Optional[Tuple[int, float]]]
LeafValue = Callable[[np.ndarray], float]


def grow_tree(
    X: np.ndarray,
    rows: np.ndarray,
    max_depth: Optional[int],
    find_split: SplitFinder,
    leaf_value: LeafValue,
) -> Dict[str, np.ndarray]:
    """深度优先建树；节点按创建顺序编号，根为 0。规则: x[feature] <= threshold 走左"""
    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[float] = []

    def new_node(node_rows: np.ndarray) -> int:
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(leaf_value(node_rows)))
        return len(feature) - 1

    stack = [(new_node(rows), rows, 0)]
    while stack:
        node, node_rows, depth = stack.pop()
        if max_depth is not None and depth >= max_depth:
            continue
        split = find_split(node_rows, depth)
        if split is None:
            continue
        f, thr = split
        go_left = X[node_rows, f] <= thr
        l_rows, r_rows = node_rows[go_left], node_rows[~go_left]
        feature[node], threshold[node] = int(f), float(thr)
        left[node] = new_node(l_rows)
        right[node] = new_node(r_rows)
        # 先压右子树，保证左子树先展开
        stack.append((right[node], r_rows, depth + 1))
        stack.append((left[node], l_rows, depth + 1))

    return {
        "feature": np.array(feature, dtype=np.int64),
        "threshold": np.array(threshold, dtype=np.float64),
        "left": np.array(left, dtype=np.int64),
        "right": np.array(right, dtype=np.int64),
        "value": np.array(value, dtype=np.float64),
    }


def predict_tree(tree: Dict[str, np.ndarray], X: np.ndarray) -> np.ndarray:
    feature, threshold = tree["feature"], tree["threshold"]
    left, right, value = tree["left"], tree["right"], tree["value"]
    node = np.zeros(X.shape[0], dtype=np.int64)
    active = np.flatnonzero(feature[node] != LEAF)
    while active.size:
        cur = node[active]
        go_left = X[active, feature[cur]] <= threshold[cur]
        node[active] = np.where(go_left, left[cur], right[cur])
        active = active[feature[node[active]] != LEAF]
    return value[node]


def n_leaves(tree: Dict[str, np.ndarray]) -> int:
    return int(np.sum(tree["feature"] == LEAF))


def sorted_candidates(Xn: np.ndarray, min_leaf: int = 1) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """每个候选特征列排序后的 (order, sorted_values, valid)

    valid[r, j]: 在第 r 与 r+1 个样本之间切分合法 (值严格增加且两侧样本数 >= min_leaf)
    """
    m = Xn.shape[0]
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    n_left = np.arange(1, m)[:, None]
    valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (m - n_left >= min_leaf)
    return order, xs, valid


def midpoint(lo: float, hi: float) -> float:
    """lo <= t < hi 的切分点"""
    t = lo + (hi - lo) / 2.0
    return t if t < hi else lo
