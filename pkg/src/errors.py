"""统一的异常层级。每个异常携带 CLI 退出码 (2 数据校验 / 3 配置 / 4 数值)。"""
from __future__ import annotations

from typing import Optional


class MetaboBenchError(Exception):
    exit_code = 1

    def __init__(self, message: str, *, row: Optional[int] = None, column: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.row = row
        self.column = column

    def location(self) -> str:
        parts = []
        if self.row is not None:
            parts.append(f"row {self.row}")
        if self.column is not None:
            parts.append(f"column '{self.column}'")
        return ", ".join(parts)

    def __str__(self) -> str:
        loc = self.location()
        return f"{self.message} ({loc})" if loc else self.message


# ================= 数据校验 (exit 2) =================
class DataValidationError(MetaboBenchError):
    exit_code = 2


class MissingValue(DataValidationError):
    pass


class NonPositiveIntensity(DataValidationError):
    pass


class DuplicateSampleId(DataValidationError):
    pass


class DuplicateFeature(DataValidationError):
    pass


class BadLabel(DataValidationError):
    pass


class SchemaError(DataValidationError):
    pass


class SampleMismatch(DataValidationError):
    pass


# ================= 配置 / 前置条件 (exit 3) =================
class ConfigError(MetaboBenchError):
    exit_code = 3


class InvalidSpec(ConfigError):
    pass


class UnknownSolver(ConfigError):
    pass


class EmptyGrid(ConfigError):
    pass


class TooFewPerClass(ConfigError):
    pass


class ShapeMismatch(ConfigError):
    pass


class LengthMismatch(ConfigError):
    pass


class WrongFamily(ConfigError):
    pass


class MissingCell(ConfigError):
    pass


class EmptyInput(ConfigError):
    pass


# ================= 数值失败 (exit 4) =================
class NumericalError(MetaboBenchError):
    exit_code = 4


class NonFiniteInput(NumericalError):
    pass


class NonFiniteLoss(NumericalError):
    pass


class FoldFitError(NumericalError):
    """某一折训练失败；保留原始异常与折序号。"""

    def __init__(self, fold: int, cause: BaseException):
        super().__init__(f"fold {fold}: {cause}")
        self.fold = fold
        self.cause = cause
        # 退出码沿用原始异常
        self.exit_code = getattr(cause, "exit_code", NumericalError.exit_code)
