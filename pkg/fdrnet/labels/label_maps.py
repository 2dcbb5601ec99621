from dataclasses import dataclass
from typing import Sequence

import numpy as np

from fdrnet.core.logger import data_logger
from fdrnet.labels.annotation import TextAnnotation
from fdrnet.labels.geometry import (as_polygon, boundary_distance, clip_polygon, dilate_polygon,
                                    offset_distance, rasterize_polygon, shrink_polygon)

SHRINK_RATIO = 0.4
THRESH_MIN = 0.3
THRESH_MAX = 0.7


@dataclass
class LabelMaps:
  """Supervision for one image; every map is (H, W) float32."""
  prob_gt: np.ndarray
  prob_mask: np.ndarray
  thresh_gt: np.ndarray
  thresh_mask: np.ndarray

  def stack(self) -> np.ndarray:
    return np.stack([self.prob_gt, self.prob_mask, self.thresh_gt, self.thresh_mask])


def gen_label_maps(annots: Sequence[TextAnnotation], height: int, width: int,
                   r_shrink: float = SHRINK_RATIO, t_min: float = THRESH_MIN,
                   t_max: float = THRESH_MAX) -> LabelMaps:
  """Rasterise shrunk text regions and the threshold band around every instance.

  Ignored instances only clear `prob_mask`. Instances whose shrunk polygon
  vanishes are excluded from probability supervision the same way but keep
  their threshold band. Overlaps combine by union (masks) and maximum (band).
  """
  prob_gt = np.zeros((height, width), dtype=bool)
  prob_mask = np.ones((height, width), dtype=bool)
  thresh_mask = np.zeros((height, width), dtype=bool)
  border = np.zeros((height, width), dtype=np.float64)

  for annot in annots:
    if annot.ignore:
      prob_mask &= ~rasterize_polygon(annot.polygon, height, width)
      continue
    poly = clip_polygon(annot.polygon, width, height)
    if poly is None:
      continue
    shape = as_polygon(poly)

    distance = offset_distance(poly, r_shrink)
    shrunk = shrink_polygon(poly, distance)
    if shrunk is None:
      data_logger.debug(f"Instance with area {shape.area:.1f} vanished when shrunk; masking it out")
      prob_mask &= ~rasterize_polygon(poly, height, width)
    else:
      prob_gt |= rasterize_polygon(shrunk, height, width)

    band = rasterize_polygon(dilate_polygon(poly, distance), height, width)
    thresh_mask |= band
    ys, xs = np.nonzero(band)
    if len(xs):
      dist = boundary_distance(poly, xs + 0.5, ys + 0.5)
      closeness = 1.0 - np.clip(dist / distance, 0.0, 1.0)
      border[ys, xs] = np.maximum(border[ys, xs], closeness)

  return LabelMaps(
    prob_gt=prob_gt.astype(np.float32),
    prob_mask=prob_mask.astype(np.float32),
    thresh_gt=(t_min + (t_max - t_min) * border).astype(np.float32),
    thresh_mask=thresh_mask.astype(np.float32),
  )
