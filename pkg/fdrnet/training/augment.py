"""Geometric augmentation applied identically to pixels and polygons.

The random choices are drawn up front (`draw_augment_params`) and applied by
`apply_augment`, so a caller can force any step to be a no-op.
"""
from dataclasses import dataclass
from typing import Optional, Sequence

import cv2
import numpy as np
from shapely.geometry import Polygon

from fdrnet.core.config import AugmentConfig
from fdrnet.core.logger import data_logger
from fdrnet.labels.annotation import TextAnnotation
from fdrnet.labels.geometry import clip_polygon

Crop = tuple[int, int, int, int]


@dataclass
class AugmentParams:
  flip: bool = False
  angle: float = 0.0
  crop: Optional[Crop] = None  # (x0, y0, x1, y1) in the rotated image


def flip_horizontal(image: np.ndarray, annots: Sequence[TextAnnotation]) -> tuple[np.ndarray, list[TextAnnotation]]:
  w = image.shape[1]
  flipped = []
  for a in annots:
    poly = a.polygon.copy()
    poly[:, 0] = w - poly[:, 0]
    flipped.append(TextAnnotation(polygon=poly[::-1].copy(), ignore=a.ignore))
  return image[:, ::-1].copy(), flipped


def rotation_matrix(angle: float, width: int, height: int) -> np.ndarray:
  """2x3 affine rotating by `angle` degrees (counter-clockwise on screen) about the image centre."""
  return cv2.getRotationMatrix2D((width / 2, height / 2), angle, 1.0)


def _transform(poly: np.ndarray, matrix: np.ndarray) -> np.ndarray:
  return poly @ matrix[:, :2].T + matrix[:, 2]


def _clip_to_canvas(annots: Sequence[TextAnnotation], width: int, height: int) -> list[TextAnnotation]:
  kept = []
  for a in annots:
    coords = clip_polygon(a.polygon, width, height)
    if coords is None:
      continue
    shape = Polygon(a.polygon)
    area = (shape if shape.is_valid else shape.buffer(0)).area
    # Instances cut down to less than half their area are no longer reliable text.
    ignore = a.ignore or Polygon(coords).area < 0.5 * area
    kept.append(TextAnnotation(polygon=coords, ignore=ignore))
  return kept


def rotate(image: np.ndarray, annots: Sequence[TextAnnotation], angle: float) -> tuple[np.ndarray, list[TextAnnotation]]:
  h, w = image.shape[:2]
  if angle == 0:
    return image, list(annots)
  matrix = rotation_matrix(angle, w, h)
  # cv2 addresses pixel centres at integer coordinates, half a pixel off polygon coordinates.
  pixel_matrix = cv2.getRotationMatrix2D(((w - 1) / 2, (h - 1) / 2), angle, 1.0)
  rotated = cv2.warpAffine(image, pixel_matrix, (w, h), flags=cv2.INTER_LINEAR, borderMode=cv2.BORDER_REFLECT)
  moved = [TextAnnotation(polygon=_transform(a.polygon, matrix), ignore=a.ignore) for a in annots]
  return rotated, _clip_to_canvas(moved, w, h)


def random_crop(image: np.ndarray, annots: Sequence[TextAnnotation], crop: Crop) -> tuple[np.ndarray, list[TextAnnotation]]:
  x0, y0, x1, y1 = crop
  cropped = image[y0:y1, x0:x1].copy()
  shifted = [TextAnnotation(polygon=a.polygon - [x0, y0], ignore=a.ignore) for a in annots]
  return cropped, _clip_to_canvas(shifted, x1 - x0, y1 - y0)


def mean_pixel(image: np.ndarray) -> np.ndarray:
  return image.reshape(-1, image.shape[-1]).mean(axis=0).round().astype(image.dtype)


def pad_to_square(image: np.ndarray, annots: Sequence[TextAnnotation],
                  size: int) -> tuple[np.ndarray, list[TextAnnotation]]:
  """Scale the longer side to `size` and pad the rest with the mean pixel."""
  h, w = image.shape[:2]
  scale = size / max(h, w)
  nh, nw = min(size, round(h * scale)), min(size, round(w * scale))
  canvas = np.empty((size, size, image.shape[2]), dtype=image.dtype)
  canvas[:] = mean_pixel(image)
  canvas[:nh, :nw] = cv2.resize(image, (nw, nh), interpolation=cv2.INTER_LINEAR) if (nh, nw) != (h, w) else image
  sx, sy = nw / w, nh / h
  scaled = [TextAnnotation(polygon=a.polygon * [sx, sy], ignore=a.ignore) for a in annots]
  return canvas, scaled


def _text_aware_crop(rng: np.random.Generator, annots: Sequence[TextAnnotation],
                     width: int, height: int, min_scale: float) -> Crop:
  cw = int(rng.integers(int(min_scale * width), width + 1))
  ch = int(rng.integers(int(min_scale * height), height + 1))
  care = [a for a in annots if not a.ignore]
  if care:
    anchor = care[int(rng.integers(len(care)))].polygon
    cx, cy = anchor.mean(axis=0)
  else:
    cx, cy = rng.uniform(0, width), rng.uniform(0, height)
  x0 = int(np.clip(cx - cw / 2 + rng.uniform(-cw / 4, cw / 4), 0, width - cw))
  y0 = int(np.clip(cy - ch / 2 + rng.uniform(-ch / 4, ch / 4), 0, height - ch))
  return x0, y0, x0 + cw, y0 + ch


def draw_augment_params(rng: np.random.Generator, annots: Sequence[TextAnnotation],
                        width: int, height: int, config: AugmentConfig = AugmentConfig()) -> AugmentParams:
  params = AugmentParams()
  params.flip = bool(rng.random() < config.flip_prob)
  if rng.random() < config.rotation_prob:
    params.angle = float(rng.uniform(-config.max_rotation, config.max_rotation))
  if rng.random() < config.crop_prob:
    params.crop = _text_aware_crop(rng, annots, width, height, config.crop_min_scale)
  return params


def apply_augment(image: np.ndarray, annots: Sequence[TextAnnotation], params: AugmentParams,
                  size: int) -> tuple[np.ndarray, list[TextAnnotation]]:
  annots = list(annots)
  if params.flip:
    image, annots = flip_horizontal(image, annots)
  if params.angle:
    image, annots = rotate(image, annots, params.angle)
  if params.crop is not None:
    image, annots = random_crop(image, annots, params.crop)
  return pad_to_square(image, annots, size)


def augment(image: np.ndarray, annots: Sequence[TextAnnotation], seed: int | np.random.SeedSequence,
            size: int = 640, config: AugmentConfig = AugmentConfig()) -> tuple[np.ndarray, list[TextAnnotation]]:
  rng = np.random.default_rng(seed)
  h, w = image.shape[:2]
  params = draw_augment_params(rng, annots, w, h, config)
  data_logger.bind(component="augment").debug(f"Augment {w}x{h}: {params}")
  return apply_augment(image, annots, params, size)
