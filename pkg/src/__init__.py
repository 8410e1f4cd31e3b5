# 此文件用于将 src 目录标记为 Python 包
# 使得可以通过 from src import data, models ... 进行调用
from src.version import APP_NAME, APP_VERSION

__all__ = ["APP_NAME", "APP_VERSION"]
