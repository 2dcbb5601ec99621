"""From a probability map to scored text polygons."""
from dataclasses import dataclass
from enum import Enum

import cv2
import numpy as np

from fdrnet.core.config import PostprocessConfig
from fdrnet.core.logger import eval_logger
from fdrnet.labels.geometry import JoinType, as_polygon, offset_polygon

BIN_THRESH = 0.3
UNCLIP_RATIO = 1.5
MIN_SCORE = 0.5
MIN_AREA = 16


class BoxType(Enum):
  POLY = "poly"
  QUAD = "quad"


@dataclass
class Detection:
  polygon: np.ndarray
  score: float

  def to_dict(self) -> dict:
    return {"polygon": np.asarray(self.polygon, dtype=np.float64).tolist(), "score": float(self.score)}

  @staticmethod
  def from_dict(d: dict) -> "Detection":
    return Detection(polygon=np.asarray(d["polygon"], dtype=np.float64).reshape(-1, 2), score=float(d["score"]))


def binarize(prob: np.ndarray, t_bin: float = BIN_THRESH) -> np.ndarray:
  return np.asarray(prob) >= t_bin


def _pixel_cover(contour: np.ndarray) -> np.ndarray:
  """Polygon through boundary pixel centres, pushed out half a pixel to the pixel edges."""
  centres = contour.reshape(-1, 2).astype(np.float64) + 0.5
  if len(centres) < 3:
    x0, y0 = centres.min(axis=0) - 0.5
    x1, y1 = centres.max(axis=0) + 0.5
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
  cover = offset_polygon(centres, 0.5, JoinType.MITER)
  return centres if cover is None else cover


def extract_boxes(bitmap: np.ndarray, prob: np.ndarray, unclip_ratio: float = UNCLIP_RATIO,
                  min_score: float = MIN_SCORE, min_area: int = MIN_AREA,
                  box_type: BoxType = BoxType.POLY) -> list[Detection]:
  """Connected components of `bitmap`, unclipped by D' = Area * unclip_ratio / Perimeter.

  Components with fewer than `min_area` pixels or a mean probability below
  `min_score` are dropped. Output polygons are in pixel-edge coordinates.
  """
  bitmap = np.asarray(bitmap, dtype=bool)
  prob = np.asarray(prob, dtype=np.float64)
  assert bitmap.shape == prob.shape, f"bitmap {bitmap.shape} and probability map {prob.shape} differ"
  _logger = eval_logger.bind(component="postprocess")

  count, labels = cv2.connectedComponents(bitmap.astype(np.uint8), connectivity=8)
  detections = []
  for label in range(1, count):
    component = labels == label
    area_px = int(component.sum())
    if area_px < min_area:
      continue
    score = float(prob[component].mean())
    if score < min_score:
      continue

    contours, _ = cv2.findContours(component.astype(np.uint8), cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE)
    contour = max(contours, key=cv2.contourArea)
    cover = _pixel_cover(contour)
    shape = as_polygon(cover)
    if shape.length <= 0:
      continue
    unclipped = offset_polygon(cover, shape.area * unclip_ratio / shape.length)
    if unclipped is None:
      continue
    if box_type is BoxType.QUAD:
      unclipped = cv2.boxPoints(cv2.minAreaRect(unclipped.astype(np.float32))).astype(np.float64)
    detections.append(Detection(polygon=unclipped, score=score))

  _logger.debug(f"{count - 1} components -> {len(detections)} detections")
  return detections


def detect(prob: np.ndarray, config: PostprocessConfig = PostprocessConfig()) -> list[Detection]:
  return extract_boxes(binarize(prob, config.thresh), prob, config.unclip_ratio, config.min_score,
                       config.min_area, BoxType(config.box_type))
