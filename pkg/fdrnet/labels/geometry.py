"""Polygon offsetting, rasterisation and distance helpers.

Pixel (x, y) covers [x, x+1) x [y, y+1) and is inside a polygon iff its centre
(x + 0.5, y + 0.5) is strictly inside (even-odd rule; the same as non-zero for
simple polygons).
"""
from enum import Enum
from typing import Iterable, Optional

import numpy as np
import pyclipper
import shapely
from shapely.geometry import Polygon

from fdrnet.core.errors import GeometryError

CLIPPER_SCALE = 2 ** 16
ARC_TOLERANCE_PX = 0.01


class JoinType(Enum):
  ROUND = pyclipper.JT_ROUND
  MITER = pyclipper.JT_MITER


def as_polygon(poly: np.ndarray) -> Polygon:
  return Polygon(np.asarray(poly, dtype=np.float64).reshape(-1, 2))


def polygon_area(poly: np.ndarray) -> float:
  return as_polygon(poly).area


def offset_distance(poly: np.ndarray, r: float) -> float:
  """D = Area * (1 - r^2) / Perimeter."""
  if not 0 < r < 1:
    raise GeometryError(f"shrink ratio must lie in (0, 1), got {r}")
  shape = as_polygon(poly)
  if shape.length <= 0:
    raise GeometryError("degenerate polygon: zero perimeter")
  return shape.area * (1 - r * r) / shape.length


def offset_polygon(poly: np.ndarray, distance: float, join: JoinType = JoinType.ROUND) -> Optional[np.ndarray]:
  """Offset outward (distance > 0) or inward (distance < 0).

  Returns the largest resulting component, or None when the polygon vanishes.
  """
  poly = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
  if distance == 0:
    return poly.copy()
  offset = pyclipper.PyclipperOffset(arc_tolerance=ARC_TOLERANCE_PX * CLIPPER_SCALE)
  offset.AddPath(pyclipper.scale_to_clipper(poly.tolist(), CLIPPER_SCALE), join.value, pyclipper.ET_CLOSEDPOLYGON)
  solution = offset.Execute(distance * CLIPPER_SCALE)
  if not solution:
    return None
  largest = max(solution, key=lambda path: abs(pyclipper.Area(path)))
  if len(largest) < 3:
    return None
  return np.array(pyclipper.scale_from_clipper(largest, CLIPPER_SCALE), dtype=np.float64)


def shrink_polygon(poly: np.ndarray, distance: float) -> Optional[np.ndarray]:
  if distance < 0:
    raise GeometryError(f"shrink distance must be non-negative, got {distance}")
  return offset_polygon(poly, -distance)


def dilate_polygon(poly: np.ndarray, distance: float) -> np.ndarray:
  if distance < 0:
    raise GeometryError(f"dilation distance must be non-negative, got {distance}")
  out = offset_polygon(poly, distance)
  assert out is not None, "outward offset of a polygon cannot vanish"
  return out


def clip_polygon(poly: np.ndarray, width: int, height: int) -> Optional[np.ndarray]:
  """Intersect with the canvas [0, width] x [0, height].

  Keeps the largest piece when the cut splits the polygon; None when nothing
  of positive area is left.
  """
  poly = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
  shape = as_polygon(poly)
  if not shape.is_valid:
    shape = shape.buffer(0)
  if shape.area <= 0:
    return None
  canvas = shapely.box(0, 0, width, height)
  if canvas.covers(shape):
    return poly.copy()
  clipped = shape.intersection(canvas)
  pieces = [g for g in getattr(clipped, "geoms", [clipped]) if g.geom_type == "Polygon" and g.area > 0]
  if not pieces:
    return None
  largest = max(pieces, key=lambda g: g.area)
  coords = np.asarray(largest.exterior.coords[:-1], dtype=np.float64)
  return coords if len(coords) >= 3 else None


def _bbox(poly: np.ndarray, height: int, width: int) -> Optional[tuple[int, int, int, int]]:
  x0 = max(int(np.floor(poly[:, 0].min())) - 1, 0)
  y0 = max(int(np.floor(poly[:, 1].min())) - 1, 0)
  x1 = min(int(np.ceil(poly[:, 0].max())) + 1, width)
  y1 = min(int(np.ceil(poly[:, 1].max())) + 1, height)
  if x0 >= x1 or y0 >= y1:
    return None
  return x0, y0, x1, y1


def rasterize_polygon(poly: np.ndarray, height: int, width: int) -> np.ndarray:
  mask = np.zeros((height, width), dtype=bool)
  poly = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
  box = _bbox(poly, height, width)
  if box is None:
    return mask
  x0, y0, x1, y1 = box
  ys, xs = np.mgrid[y0:y1, x0:x1]
  shape = as_polygon(poly)
  if not shape.is_valid:
    shape = shape.buffer(0)
  mask[y0:y1, x0:x1] = shapely.contains_xy(shape, xs + 0.5, ys + 0.5)
  return mask


def rasterize(polys: Iterable[np.ndarray], height: int, width: int) -> np.ndarray:
  mask = np.zeros((height, width), dtype=bool)
  for poly in polys:
    mask |= rasterize_polygon(poly, height, width)
  return mask


def point_segment_distance(xs: np.ndarray, ys: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
  ab = b - a
  length_sq = float(ab @ ab)
  if length_sq == 0:
    return np.hypot(xs - a[0], ys - a[1])
  t = ((xs - a[0]) * ab[0] + (ys - a[1]) * ab[1]) / length_sq
  t = np.clip(t, 0.0, 1.0)
  return np.hypot(xs - (a[0] + t * ab[0]), ys - (a[1] + t * ab[1]))


def boundary_distance(poly: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
  """Distance from every (xs, ys) point to the nearest polygon edge."""
  poly = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
  return np.min([point_segment_distance(xs, ys, a, b) for a, b in zip(poly, np.roll(poly, -1, axis=0))], axis=0)
