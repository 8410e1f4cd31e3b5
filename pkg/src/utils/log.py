import logging

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(verbosity: int = 0) -> None:
    """verbosity: -1 安静 (WARNING), 0 默认 (INFO), 1 以上 DEBUG"""
    if verbosity < 0:
        level = logging.WARNING
    elif verbosity == 0:
        level = logging.INFO
    else:
        level = logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
