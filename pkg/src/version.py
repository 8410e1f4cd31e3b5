APP_NAME = "metabobench"
APP_VERSION = "v1.0.0"
# report.json / 模型 JSON 的格式版本，结构变化时递增
DOCUMENT_VERSION = 1
