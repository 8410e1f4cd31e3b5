from __future__ import annotations

import logging
from typing import Any, Callable, Iterable, List, Sequence

from joblib import Parallel, delayed

logger = logging.getLogger(__name__)


def run_tasks(fn: Callable[..., Any], tasks: Iterable[Sequence[Any]], threads: int = 1) -> List[Any]:
    """按任务顺序返回结果；threads <= 1 时在当前进程串行执行。

    每个任务自带派生种子，所以并行结果与串行逐位一致。
    """
    tasks = list(tasks)
    if threads <= 1 or len(tasks) <= 1:
        return [fn(*args) for args in tasks]
    logger.debug("dispatching %d tasks on %d workers", len(tasks), threads)
    return Parallel(n_jobs=threads)(delayed(fn)(*args) for args in tasks)
