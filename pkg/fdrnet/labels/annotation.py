"""Text instance annotations and their one-file-per-image text format.

Each line is `x1,y1,x2,y2,...,xn,yn,<flag>` where the flag is `###` or `1`
for DO NOT CARE instances and `0` otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from shapely.geometry import LinearRing

from fdrnet.core.errors import AnnotationFormatError, GeometryError

IGNORE_FLAGS = {"###": True, "1": True, "0": False}


@dataclass
class TextAnnotation:
  polygon: np.ndarray
  ignore: bool = False

  def __post_init__(self) -> None:
    self.polygon = np.asarray(self.polygon, dtype=np.float64).reshape(-1, 2)
    if len(self.polygon) < 3:
      raise GeometryError(f"a text polygon needs at least 3 vertices, got {len(self.polygon)}")

  @property
  def is_simple(self) -> bool:
    return LinearRing(self.polygon).is_simple

  def validate(self) -> None:
    if not self.is_simple:
      raise GeometryError(f"text polygon is self-intersecting: {self.polygon.tolist()}")

  def to_line(self) -> str:
    coords = ",".join(repr(float(v)) for v in self.polygon.reshape(-1))
    return f"{coords},{'###' if self.ignore else '0'}"


def parse_annotation_line(line: str, lineno: int = 0) -> TextAnnotation:
  fields = [f.strip() for f in line.strip().split(",")]
  flag = fields[-1]
  if flag not in IGNORE_FLAGS:
    raise AnnotationFormatError(f"line {lineno}: last field must be '###', '0' or '1', got {flag!r}")
  coords = fields[:-1]
  if len(coords) % 2 or len(coords) < 6:
    raise AnnotationFormatError(f"line {lineno}: expected an even number (>= 6) of coordinates, got {len(coords)}")
  try:
    values = [float(c) for c in coords]
  except ValueError as e:
    raise AnnotationFormatError(f"line {lineno}: {e}") from e
  annot = TextAnnotation(polygon=np.array(values).reshape(-1, 2), ignore=IGNORE_FLAGS[flag])
  try:
    annot.validate()
  except GeometryError as e:
    raise AnnotationFormatError(f"line {lineno}: {e}") from e
  return annot


def read_annotations(path: str | Path) -> list[TextAnnotation]:
  annots = []
  for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
    if line.strip():
      annots.append(parse_annotation_line(line, lineno))
  return annots


def write_annotations(path: str | Path, annots: Iterable[TextAnnotation]) -> None:
  Path(path).write_text("".join(a.to_line() + "\n" for a in annots), encoding="utf-8")
