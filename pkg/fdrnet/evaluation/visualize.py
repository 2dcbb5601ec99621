from typing import Sequence

import cv2
import numpy as np
from matplotlib import colormaps

from fdrnet.evaluation.postprocess import Detection
from fdrnet.labels.annotation import TextAnnotation

DET_COLOR = (0, 200, 0)
GT_COLOR = (255, 128, 0)
DONT_CARE_COLOR = (0, 0, 255)
COLORMAP = "viridis"


def _poly_points(poly: np.ndarray) -> np.ndarray:
  return np.round(np.asarray(poly).reshape(-1, 1, 2)).astype(np.int32)


def render_detections(image: np.ndarray, detections: Sequence[Detection],
                      gts: Sequence[TextAnnotation] = ()) -> np.ndarray:
  """BGR canvas with ground truth in blue, DO NOT CARE in red and detections in green."""
  canvas = image.copy()
  for gt in gts:
    cv2.polylines(canvas, [_poly_points(gt.polygon)], True, DONT_CARE_COLOR if gt.ignore else GT_COLOR, 1)
  for det in detections:
    cv2.polylines(canvas, [_poly_points(det.polygon)], True, DET_COLOR, 2)
  return canvas


def colorize(values: np.ndarray) -> np.ndarray:
  """Map [0, 1] values to a BGR uint8 image with a perceptually uniform colormap."""
  rgba = colormaps[COLORMAP](np.clip(values, 0.0, 1.0))
  return (rgba[..., 2::-1] * 255).round().astype(np.uint8)


def overlay(image: np.ndarray, values: np.ndarray, alpha: float = 0.5) -> np.ndarray:
  return cv2.addWeighted(image, 1 - alpha, colorize(values), alpha, 0.0)


def render_diagnostic_panel(image: np.ndarray, gts: Sequence[TextAnnotation], detections: Sequence[Detection],
                            prob: np.ndarray, thresh: np.ndarray) -> np.ndarray:
  """Ground truth | detections | probability map | threshold map, side by side."""
  h, w = image.shape[:2]
  panels = [
    render_detections(image, [], gts),
    render_detections(image, detections),
    colorize(prob[:h, :w]),
    colorize(thresh[:h, :w]),
  ]
  return np.concatenate(panels, axis=1)
