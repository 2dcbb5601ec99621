import sys
from logging import INFO, DEBUG, WARNING

from loguru import logger
logger.remove()

_train_fmt = "<green>{time:HH:mm:ss}</green> <blue>{level}</blue> <cyan>{extra[component]}</cyan> {message}"
logger.add(
  sys.stdout,
  filter=lambda record: record["extra"].get("name") == "t",
  format=_train_fmt,
  level=INFO)

_eval_fmt = "<green>{time:HH:mm:ss}</green> <blue>{level}</blue> <magenta>{extra[component]}</magenta> {message}"
logger.add(sys.stdout,
           format=_eval_fmt,
           filter=lambda record: record["extra"].get("name") == "e",
           level=INFO)

_data_fmt = "<green>{time:HH:mm:ss}</green> <blue>{level}</blue> {message}"
logger.add(sys.stdout,
           filter=lambda record: record["extra"].get("name") == "d",
           format=_data_fmt,
           level=WARNING)

train_logger = logger.bind(name="t", component="trainer")
eval_logger = logger.bind(name="e", component="eval")
data_logger = logger.bind(name="d", component="data")

_run_fmt = "{time:YYYY-MM-DD HH:mm:ss.SSS} {level} {extra[name]} {message}"


def set_run_logfile(file: str, level: int = DEBUG) -> int:
  """Mirror every component into `file` until `remove_run_logfile` is called."""
  sink_id = logger.add(file, format=_run_fmt,
                       filter=lambda record: record["extra"].get("name") in ("t", "e", "d"),
                       level=level)
  return sink_id


def remove_run_logfile(sink_id: int) -> None:
  logger.remove(sink_id)
