"""代谢组学数据表：读取、校验、合并 ESI+/ESI- 以及合成数据。"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from enum import Enum
from typing import Any, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.config import (
    LABEL_COLUMN,
    METADATA_COLUMNS,
    SAMPLE_ID_COLUMN,
    TABLE_FLOAT_FORMAT,
    UNKNOWN_PREFIX,
)
from src.errors import (
    BadLabel,
    DataValidationError,
    DuplicateFeature,
    DuplicateSampleId,
    InvalidSpec,
    MissingValue,
    NonPositiveIntensity,
    SampleMismatch,
    SchemaError,
)

logger = logging.getLogger(__name__)


class IonMode(str, Enum):
    ESI_POS = "ESI+"
    ESI_NEG = "ESI-"

    @property
    def suffix(self) -> str:
        return f"_{self.value}"


def parse_mode(value: Any) -> IonMode:
    if isinstance(value, IonMode):
        return value
    key = str(value).strip().upper().replace("−", "-")
    for m in IonMode:
        if key in (m.value, m.name, m.name.replace("ESI_", "")):
            return m
    raise SchemaError(f"未知电离模式: {value}")


def is_known_name(name: str) -> bool:
    return not name.startswith(UNKNOWN_PREFIX)


@dataclass(frozen=True)
class FeatureMeta:
    name: str
    mode: IonMode
    known: bool

    @classmethod
    def from_name(cls, name: str, mode: IonMode) -> "FeatureMeta":
        return cls(name=name, mode=mode, known=is_known_name(name))

    def display_name(self) -> str:
        """带电离模式后缀的名称 (Militarinone A_ESI+)"""
        if self.name.endswith(IonMode.ESI_POS.suffix) or self.name.endswith(IonMode.ESI_NEG.suffix):
            return self.name
        return self.name + self.mode.suffix


@dataclass(frozen=True, eq=False)
class MetaboliteTable:
    sample_ids: Tuple[str, ...]
    features: Tuple[FeatureMeta, ...]
    values: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        labels = np.asarray(self.labels)
        object.__setattr__(self, "sample_ids", tuple(str(s) for s in self.sample_ids))
        object.__setattr__(self, "features", tuple(self.features))

        if values.ndim != 2:
            raise SchemaError(f"数值矩阵必须是二维 (当前 {values.ndim} 维)")
        n, p = values.shape
        if len(self.sample_ids) != n or labels.shape != (n,):
            raise SchemaError(f"行数不一致: {n} 行, {len(self.sample_ids)} 个样本编号, {labels.size} 个标签")
        if len(self.features) != p:
            raise SchemaError(f"列数不一致: {p} 列, {len(self.features)} 个特征")

        bad = ~np.isin(labels, (0, 1))
        if bad.any():
            r = int(np.flatnonzero(bad)[0])
            raise BadLabel(f"标签必须是 0 或 1，读到 {labels[r]!r}", row=r, column=LABEL_COLUMN)
        nan = np.isnan(values)
        if nan.any():
            r, c = (int(v) for v in np.argwhere(nan)[0])
            raise MissingValue("存在缺失值", row=r, column=self.features[c].name)
        nonpos = ~(np.isfinite(values) & (values > 0))
        if nonpos.any():
            r, c = (int(v) for v in np.argwhere(nonpos)[0])
            raise NonPositiveIntensity(f"强度必须为有限正数，读到 {values[r, c]!r}", row=r, column=self.features[c].name)
        _check_unique(self.sample_ids, DuplicateSampleId, "样本编号")
        _check_unique([f.name for f in self.features], DuplicateFeature, "特征名")

        values.setflags(write=False)
        labels = labels.astype(np.int8)
        labels.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    @property
    def feature_names(self) -> List[str]:
        return [f.name for f in self.features]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MetaboliteTable):
            return NotImplemented
        return (
            self.sample_ids == other.sample_ids
            and self.features == other.features
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None


def _check_unique(items: Sequence[str], err, what: str) -> None:
    seen = set()
    for i, item in enumerate(items):
        if item in seen:
            raise err(f"{what}重复: {item}", row=i if err is DuplicateSampleId else None)
        seen.add(item)


# ================= CSV 读写 =================
@dataclass(frozen=True)
class Issue:
    kind: type
    message: str
    row: Optional[int] = None
    column: Optional[str] = None

    def to_error(self) -> DataValidationError:
        return self.kind(self.message, row=self.row, column=self.column)

    def __str__(self) -> str:
        return str(self.to_error())


_MISSING_TOKENS = {"", "nan", "na", "n/a", "null", "none"}


def _parse_column(raw: pd.Series, name: str, issues: List[Issue]) -> np.ndarray:
    """逐列转换为 float；失败时逐格定位问题"""
    try:
        col = raw.astype(np.float64).to_numpy()
    except (TypeError, ValueError):
        col = np.empty(len(raw), dtype=np.float64)
        for r, cell in enumerate(raw):
            text = cell.strip()
            if text.lower() in _MISSING_TOKENS:
                col[r] = np.nan
                continue
            try:
                col[r] = float(text)
            except ValueError:
                col[r] = np.nan
                issues.append(Issue(SchemaError, f"非数值内容 {cell!r}", r, name))
    for r in np.flatnonzero(np.isnan(col)):
        text = str(raw.iloc[r]).strip().lower()
        if text in _MISSING_TOKENS:
            issues.append(Issue(MissingValue, "存在缺失值", int(r), name))
    for r in np.flatnonzero(~np.isnan(col) & ~((col > 0) & np.isfinite(col))):
        issues.append(Issue(NonPositiveIntensity, f"强度必须为有限正数，读到 {raw.iloc[r]!r}", int(r), name))
    return col


def scan_csv(path: str) -> Tuple[Optional[pd.DataFrame], List[Issue]]:
    """读取并收集所有问题 (不抛出)；frame 只在结构可解析时返回"""
    if not os.path.exists(path):
        return None, [Issue(SchemaError, f"找不到文件: {path}")]
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        return None, [Issue(SchemaError, f"无法解析 CSV: {e}")]

    issues: List[Issue] = []
    cols = list(raw.columns)
    if len(cols) < 3 or cols[0] != SAMPLE_ID_COLUMN or cols[-1] != LABEL_COLUMN:
        issues.append(Issue(SchemaError, f"表头必须为 {SAMPLE_ID_COLUMN},<特征...>,{LABEL_COLUMN}"))
        return None, issues
    interior = cols[1:-1]
    dup = [c for c in interior if "." in c and c.rsplit(".", 1)[0] in interior and c.rsplit(".", 1)[1].isdigit()]
    if dup:
        # pandas 会把重复列名改写为 name.1
        issues.append(Issue(DuplicateFeature, f"特征名重复: {dup[0].rsplit('.', 1)[0]}", column=dup[0]))

    ids = raw[SAMPLE_ID_COLUMN].str.strip()
    seen = {}
    for r, sid in enumerate(ids):
        if sid == "":
            issues.append(Issue(MissingValue, "样本编号为空", r, SAMPLE_ID_COLUMN))
        elif sid in seen:
            issues.append(Issue(DuplicateSampleId, f"样本编号重复: {sid} (首次出现于第 {seen[sid]} 行)", r, SAMPLE_ID_COLUMN))
        else:
            seen[sid] = r

    labels = np.zeros(len(raw), dtype=np.int8)
    for r, cell in enumerate(raw[LABEL_COLUMN]):
        text = cell.strip()
        try:
            v = float(text)
        except ValueError:
            v = np.nan
        if v in (0.0, 1.0):
            labels[r] = int(v)
        elif text.lower() in _MISSING_TOKENS:
            issues.append(Issue(MissingValue, "标签缺失", r, LABEL_COLUMN))
        else:
            issues.append(Issue(BadLabel, f"标签必须是 0 或 1，读到 {cell!r}", r, LABEL_COLUMN))

    values = np.column_stack([_parse_column(raw[c], c, issues) for c in interior]) if interior else np.empty((len(raw), 0))
    frame = pd.DataFrame(values, columns=interior)
    frame.insert(0, SAMPLE_ID_COLUMN, ids.to_numpy())
    frame[LABEL_COLUMN] = labels
    # 按行、列顺序稳定排序，保证报告可比
    col_pos = {c: i for i, c in enumerate(cols)}
    issues.sort(key=lambda it: (it.row if it.row is not None else -1, col_pos.get(it.column, -1)))
    return frame, issues


def load_csv(path: str, mode: IonMode, metadata: Optional[str] = None) -> MetaboliteTable:
    mode = parse_mode(mode)
    frame, issues = scan_csv(path)
    if issues:
        logger.debug("%s: %d validation issues", path, len(issues))
        raise issues[0].to_error()
    names = list(frame.columns[1:-1])
    table = MetaboliteTable(
        sample_ids=tuple(frame[SAMPLE_ID_COLUMN]),
        features=tuple(FeatureMeta.from_name(n, mode) for n in names),
        values=frame[names].to_numpy(dtype=np.float64),
        labels=frame[LABEL_COLUMN].to_numpy(),
    )
    logger.info("loaded %s: %d samples x %d features (%s)", path, table.n_samples, table.n_features, mode.value)
    if metadata:
        table = apply_metadata(table, metadata)
    return table


def write_csv(table: MetaboliteTable, path: str) -> None:
    frame = pd.DataFrame(table.values, columns=table.feature_names)
    frame.insert(0, SAMPLE_ID_COLUMN, list(table.sample_ids))
    frame[LABEL_COLUMN] = table.labels.astype(int)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame.to_csv(path, index=False, float_format=TABLE_FLOAT_FORMAT, encoding="utf-8", lineterminator="\n")


def apply_metadata(table: MetaboliteTable, path: str) -> MetaboliteTable:
    """用 name,mode,known 元数据覆盖 known 标记；mode 列为空时匹配任意模式"""
    if not os.path.exists(path):
        raise SchemaError(f"找不到元数据文件: {path}")
    meta = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    if tuple(meta.columns) != METADATA_COLUMNS:
        raise SchemaError(f"元数据表头必须为 {','.join(METADATA_COLUMNS)}")
    overrides = {}
    for r, row in meta.iterrows():
        flag = row["known"].strip().lower()
        if flag not in ("true", "false", "1", "0", "yes", "no"):
            raise SchemaError(f"known 列取值无效: {row['known']!r}", row=int(r), column="known")
        mode = parse_mode(row["mode"]) if row["mode"].strip() else None
        overrides[row["name"].strip()] = (mode, flag in ("true", "1", "yes"))

    features = []
    changed = 0
    for f in table.features:
        hit = overrides.get(f.name)
        if hit is not None and (hit[0] is None or hit[0] == f.mode):
            if hit[1] != f.known:
                changed += 1
            features.append(FeatureMeta(f.name, f.mode, hit[1]))
        else:
            features.append(f)
    logger.info("metadata %s: %d known flags overridden", path, changed)
    return MetaboliteTable(table.sample_ids, tuple(features), table.values, table.labels)


# ================= 合并 =================
def merge_modes(pos: MetaboliteTable, neg: MetaboliteTable) -> MetaboliteTable:
    if pos.sample_ids != neg.sample_ids:
        raise SampleMismatch("ESI+ 与 ESI- 的样本编号或顺序不一致")
    if not np.array_equal(pos.labels, neg.labels):
        raise SampleMismatch("ESI+ 与 ESI- 的标签不一致")
    features = tuple(
        FeatureMeta(f.name + f.mode.suffix, f.mode, f.known) for f in pos.features + neg.features
    )
    return MetaboliteTable(
        sample_ids=pos.sample_ids,
        features=features,
        values=np.hstack([pos.values, neg.values]),
        labels=pos.labels,
    )


@dataclass(frozen=True)
class DatasetInfo:
    samples: int
    known: int
    unknown: int
    total: int
    class0: int
    class1: int

    def to_dict(self) -> Mapping[str, int]:
        return {
            "samples": self.samples,
            "known": self.known,
            "unknown": self.unknown,
            "total": self.total,
            "class0": self.class0,
            "class1": self.class1,
        }


def dataset_info(table: MetaboliteTable) -> DatasetInfo:
    known = sum(1 for f in table.features if f.known)
    class1 = int(table.labels.sum())
    return DatasetInfo(
        samples=table.n_samples,
        known=known,
        unknown=table.n_features - known,
        total=table.n_features,
        class0=table.n_samples - class1,
        class1=class1,
    )


# ================= 合成数据 =================
@dataclass(frozen=True)
class SynthSpec:
    n_samples: int = 81
    n_features_pos: int = 1922
    n_features_neg: int = 939
    n_class0: int = 27
    n_class1: int = 54
    n_informative: int = 40
    effect_size: float = 1.0
    seed: int = 7
    known_fraction: float = 611 / 1922
    known_fraction_neg: float = 401 / 939

    def __post_init__(self):
        counts = (self.n_samples, self.n_features_pos, self.n_features_neg, self.n_class0, self.n_class1, self.n_informative)
        if any(int(c) != c or c < 0 for c in counts):
            raise InvalidSpec("计数必须是非负整数")
        if self.n_class0 + self.n_class1 != self.n_samples:
            raise InvalidSpec(f"n_class0 + n_class1 ({self.n_class0 + self.n_class1}) != n_samples ({self.n_samples})")
        if self.n_samples < 1 or self.n_features_pos + self.n_features_neg < 1:
            raise InvalidSpec("样本数与特征数必须为正")
        if self.n_informative > self.n_features_pos + self.n_features_neg:
            raise InvalidSpec("n_informative 超过特征总数")
        if not np.isfinite(self.effect_size) or self.effect_size < 0:
            raise InvalidSpec("effect_size 必须 >= 0")
        for name in ("known_fraction", "known_fraction_neg"):
            if not 0 <= getattr(self, name) <= 1:
                raise InvalidSpec(f"{name} 必须在 [0, 1] 内")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidSpec("seed 必须是 64 位无符号整数")

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any], default_seed: Optional[int] = None) -> "SynthSpec":
        allowed = set(cls.__dataclass_fields__)
        unknown = set(raw) - allowed
        if unknown:
            raise InvalidSpec(f"SynthSpec 包含未知字段: {sorted(unknown)}")
        kw = dict(raw)
        if "seed" not in kw and default_seed is not None:
            kw["seed"] = default_seed
        return cls(**kw)


def _feature_names(n: int, n_known: int, rng: np.random.Generator) -> List[str]:
    known_mask = np.zeros(n, dtype=bool)
    known_mask[rng.permutation(n)[:n_known]] = True
    return [f"metabolite{j + 1}" if known_mask[j] else f"{UNKNOWN_PREFIX}{j + 1}" for j in range(n)]


def synthesize_with_truth(spec: SynthSpec) -> Tuple[MetaboliteTable, MetaboliteTable, List[str]]:
    """返回 (ESI+, ESI-, 植入信号的合并后特征名)"""
    rng = np.random.default_rng(int(spec.seed))
    n = spec.n_samples
    p_pos, p_neg = spec.n_features_pos, spec.n_features_neg
    p = p_pos + p_neg

    # 1. 标签随机排列
    labels = np.array([0] * spec.n_class0 + [1] * spec.n_class1, dtype=np.int8)
    labels = labels[rng.permutation(n)]

    # 2. log2 空间: 每个特征的基线水平与离散度 + 每个样本的整体偏移 (稀释效应)
    base = rng.uniform(10.0, 20.0, size=p)
    spread = rng.uniform(0.5, 1.0, size=p)
    sample_shift = rng.normal(0.0, 0.1, size=(n, 1))
    log_values = base + spread * rng.standard_normal((n, p)) + sample_shift

    # 3. 植入信号: 类别 1 的信息特征整体平移 effect_size
    informative = np.sort(rng.choice(p, size=spec.n_informative, replace=False))
    log_values[np.ix_(labels == 1, informative)] += spec.effect_size
    values = np.exp2(log_values)

    names_pos = _feature_names(p_pos, int(round(spec.known_fraction * p_pos)), rng)
    names_neg = _feature_names(p_neg, int(round(spec.known_fraction_neg * p_neg)), rng)
    sample_ids = tuple(f"S{i + 1:03d}" for i in range(n))

    pos = MetaboliteTable(sample_ids, tuple(FeatureMeta.from_name(nm, IonMode.ESI_POS) for nm in names_pos), values[:, :p_pos], labels)
    neg = MetaboliteTable(sample_ids, tuple(FeatureMeta.from_name(nm, IonMode.ESI_NEG) for nm in names_neg), values[:, p_pos:], labels)
    merged_names = [nm + IonMode.ESI_POS.suffix for nm in names_pos] + [nm + IonMode.ESI_NEG.suffix for nm in names_neg]
    truth = [merged_names[j] for j in informative]
    return pos, neg, truth


def synthesize(spec: SynthSpec) -> Tuple[MetaboliteTable, MetaboliteTable]:
    pos, neg, _ = synthesize_with_truth(spec)
    return pos, neg
