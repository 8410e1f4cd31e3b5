# 此文件用于将 utils 目录标记为 Python 包
