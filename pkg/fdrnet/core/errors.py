class FdrnetError(Exception):
  """Base class of every error raised on purpose by fdrnet."""


class ShapeError(FdrnetError, ValueError):
  pass


class GeometryError(FdrnetError, ValueError):
  pass


class AnnotationFormatError(FdrnetError, ValueError):
  pass


class ConfigError(FdrnetError, ValueError):
  pass


class CheckpointError(FdrnetError):
  pass


class SynthSpecError(FdrnetError, ValueError):
  pass


class ScheduleError(FdrnetError, ValueError):
  pass


class TrainingDivergedError(FdrnetError, RuntimeError):
  pass


class CorpusError(FdrnetError, ValueError):
  """Missing, unreadable or empty image corpus."""
