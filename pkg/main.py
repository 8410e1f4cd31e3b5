import os
import sys

# BLAS 线程固定为 1，结果与 --threads 无关 (必须在导入 numpy 之前)
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

from src.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
