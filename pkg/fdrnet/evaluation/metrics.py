"""Precision / recall / F-score of detections against ground-truth polygons.

Matching is greedy: all (detection, ground truth) pairs with IoU at or above
the threshold are visited by decreasing IoU and accepted when both sides are
still free. A detection is set aside (neither TP nor FP) when at least half of its
area lies inside a DO NOT CARE region; this rule does not depend on the
IoU threshold, so a PR curve always scores the same detection set.
"""
import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from fdrnet.core.message import JsonRecord
from fdrnet.evaluation.postprocess import Detection
from fdrnet.labels.annotation import TextAnnotation
from fdrnet.labels.geometry import as_polygon

IOU_THRESH = 0.5
IGNORE_AREA_PRECISION = 0.5
PR_CSV_HEADER = ["iou", "precision", "recall", "f_score"]


def _valid(poly: np.ndarray):
  shape = as_polygon(poly)
  if not shape.is_valid:
    shape = shape.buffer(0)
  return shape


def polygon_iou(a: np.ndarray, b: np.ndarray) -> float:
  pa, pb = _valid(a), _valid(b)
  if pa.area <= 0 or pb.area <= 0:
    return 0.0
  inter = pa.intersection(pb).area
  union = pa.area + pb.area - inter
  return float(inter / union) if union > 0 else 0.0


def _ratio(num: int, den: int) -> float:
  return num / den if den > 0 else 1.0


def f_score(precision: float, recall: float) -> float:
  return 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


@dataclass
class EvalReport:
  tp: int = 0
  fp: int = 0
  fn: int = 0
  ignored_gt: int = 0
  ignored_dets: int = 0
  matches: list[tuple[int, int, float]] = field(default_factory=list)

  @property
  def precision(self) -> float:
    return _ratio(self.tp, self.tp + self.fp)

  @property
  def recall(self) -> float:
    return _ratio(self.tp, self.tp + self.fn)

  @property
  def f_score(self) -> float:
    return f_score(self.precision, self.recall)

  def __add__(self, other: "EvalReport") -> "EvalReport":
    return EvalReport(tp=self.tp + other.tp, fp=self.fp + other.fp, fn=self.fn + other.fn,
                      ignored_gt=self.ignored_gt + other.ignored_gt,
                      ignored_dets=self.ignored_dets + other.ignored_dets)

  def to_record(self, **extra) -> JsonRecord:
    return JsonRecord({
      **extra,
      "precision": self.precision, "recall": self.recall, "f_score": self.f_score,
      "tp": self.tp, "fp": self.fp, "fn": self.fn,
      "ignored_gt": self.ignored_gt, "ignored_dets": self.ignored_dets,
      "matches": [[d, g, iou] for d, g, iou in self.matches],
    })


def evaluate(dets: Sequence[Detection], gts: Sequence[TextAnnotation], iou_thresh: float = IOU_THRESH) -> EvalReport:
  care = [i for i, g in enumerate(gts) if not g.ignore]
  dont_care = [_valid(g.polygon) for g in gts if g.ignore]

  counted = []
  for i, det in enumerate(dets):
    shape = _valid(det.polygon)
    covered = sum(shape.intersection(dc).area for dc in dont_care)
    if dont_care and shape.area > 0 and covered / shape.area >= IGNORE_AREA_PRECISION:
      continue
    counted.append(i)

  pairs = []
  for d in counted:
    for g in care:
      iou = polygon_iou(dets[d].polygon, gts[g].polygon)
      if iou >= iou_thresh and iou > 0:
        pairs.append((-iou, d, g))
  pairs.sort()

  used_d: set[int] = set()
  used_g: set[int] = set()
  matches = []
  for neg_iou, d, g in pairs:
    if d in used_d or g in used_g:
      continue
    used_d.add(d)
    used_g.add(g)
    matches.append((d, g, -neg_iou))

  return EvalReport(tp=len(matches), fp=len(counted) - len(matches), fn=len(care) - len(matches),
                    ignored_gt=len(gts) - len(care), ignored_dets=len(dets) - len(counted),
                    matches=matches)


def evaluate_corpus(pairs: Iterable[tuple[Sequence[Detection], Sequence[TextAnnotation]]],
                    iou_thresh: float = IOU_THRESH) -> tuple[list[EvalReport], EvalReport]:
  reports = [evaluate(dets, gts, iou_thresh) for dets, gts in pairs]
  summary = EvalReport()
  for r in reports:
    summary = summary + r
  return reports, summary


@dataclass
class PrPoint:
  iou: float
  precision: float
  recall: float
  f_score: float

  def csv_row(self) -> list[str]:
    return [f"{self.iou:.2f}", f"{self.precision:.4f}", f"{self.recall:.4f}", f"{self.f_score:.4f}"]


def pr_curve(pairs: Sequence[tuple[Sequence[Detection], Sequence[TextAnnotation]]],
             iou_grid: Sequence[float]) -> list[PrPoint]:
  """Corpus-level precision and recall at every IoU threshold of `iou_grid`."""
  curve = []
  for iou in iou_grid:
    assert 0 < iou <= 1, f"IoU thresholds must lie in (0, 1], got {iou}"
    _, summary = evaluate_corpus(pairs, iou)
    curve.append(PrPoint(iou=float(iou), precision=summary.precision, recall=summary.recall,
                         f_score=summary.f_score))
  return curve


def pr_curve_area(curve: Sequence[PrPoint]) -> float:
  """Trapezoid area under precision as a function of recall."""
  points = sorted((p.recall, p.precision) for p in curve)
  area = 0.0
  for (r0, p0), (r1, p1) in zip(points, points[1:]):
    area += (r1 - r0) * (p0 + p1) / 2
  return area


def write_pr_curve(path: str | Path, curve: Sequence[PrPoint]) -> None:
  with open(path, "w", newline="", encoding="utf-8") as f:
    writer = csv.writer(f)
    writer.writerow(PR_CSV_HEADER)
    writer.writerows(p.csv_row() for p in curve)


def default_iou_grid() -> list[float]:
  return [round(t, 2) for t in np.arange(0.5, 0.96, 0.05)]
