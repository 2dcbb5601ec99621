"""Synthetic text-like scenes with exact polygons.

Text blocks are rows of high-contrast glyphs (bar patterns) on a textured
background. Every scene can include the two hard cases of segmentation-based
detectors: a pair of blocks separated by only `spacing` pixels (adhesion) and
one block of extreme aspect ratio with wide glyph spacing (over-segmentation).
"""
import math
from typing import Optional

import cv2
import numpy as np
from shapely.geometry import Polygon, box

from fdrnet.core.config import SynthSceneSpec
from fdrnet.core.errors import SynthSpecError
from fdrnet.core.logger import data_logger
from fdrnet.labels.annotation import TextAnnotation

MAX_ATTEMPTS = 200
MAX_FILL = 0.6
# Fraction of the glyph pitch covered by ink, for ordinary and wide-spaced text.
INK_FRACTION = (0.55, 0.8)
WIDE_INK_FRACTION = (0.25, 0.4)


def _frame(theta: float) -> tuple[np.ndarray, np.ndarray]:
  u = np.array([math.cos(theta), math.sin(theta)])
  return u, np.array([-u[1], u[0]])


def _quad(center: np.ndarray, theta: float, w: float, h: float) -> np.ndarray:
  u, v = _frame(theta)
  hw, hh = w / 2 * u, h / 2 * v
  return np.array([center - hw - hh, center + hw - hh, center + hw + hh, center - hw + hh])


def _draw_glyph(image: np.ndarray, rng: np.random.Generator, center: np.ndarray, theta: float,
                gw: float, gh: float, color: tuple[int, ...]) -> None:
  """One glyph made of 1-3 strokes inside a gw x gh cell."""
  u, v = _frame(theta)
  stroke = max(gw, gh) * 0.22
  pattern = int(rng.integers(4))
  strokes: list[tuple[float, float, float, float]]  # (du, dv, w, h) in the glyph frame
  if pattern == 0:
    strokes = [(0.0, 0.0, gw, gh)]
  elif pattern == 1:
    strokes = [(-gw / 2 + stroke / 2, 0.0, stroke, gh), (gw / 2 - stroke / 2, 0.0, stroke, gh)]
  elif pattern == 2:
    strokes = [(-gw / 2 + stroke / 2, 0.0, stroke, gh)] + [
      (0.0, dv, gw, stroke) for dv in (-gh / 2 + stroke / 2, 0.0, gh / 2 - stroke / 2)]
  else:
    strokes = [(0.0, 0.0, stroke, gh), (0.0, -gh / 2 + stroke / 2, gw, stroke)]
  for du, dv, w, h in strokes:
    quad = _quad(center + du * u + dv * v, theta, w, h)
    cv2.fillConvexPoly(image, np.round(quad * 16).astype(np.int32), color, lineType=cv2.LINE_AA, shift=4)


def _background(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
  base = rng.uniform(60, 200, size=3)
  noise = rng.normal(0.0, 1.0, size=(height, width, 3)).astype(np.float32)
  texture = cv2.GaussianBlur(noise, (0, 0), sigmaX=3.0)
  texture /= max(float(texture.std()), 1e-6)
  image = base + 18.0 * texture
  for _ in range(int(rng.integers(2, 6))):
    p0 = rng.uniform(0, [width, height])
    p1 = rng.uniform(0, [width, height])
    shade = tuple(float(c) for c in base + rng.uniform(-30, 30, size=3))
    cv2.line(image, tuple(int(c) for c in p0), tuple(int(c) for c in p1), shade, int(rng.integers(1, 4)))
  return np.clip(image, 0, 255).astype(np.uint8)


def _ink(rng: np.random.Generator, image: np.ndarray, poly: np.ndarray) -> tuple[int, ...]:
  x0, y0 = np.floor(poly.min(axis=0)).astype(int).clip(0)
  x1, y1 = np.ceil(poly.max(axis=0)).astype(int)
  under = float(image[y0:y1 + 1, x0:x1 + 1].mean()) if image[y0:y1 + 1, x0:x1 + 1].size else 128.0
  level = rng.uniform(0, 40) if under > 128 else rng.uniform(215, 255)
  return tuple(float(np.clip(level + rng.uniform(-15, 15), 0, 255)) for _ in range(3))


class _Block:
  """Geometry of one text block before rendering."""

  def __init__(self, center: np.ndarray, theta: float, width: float, height: float,
               curvature: float = 0.0, wide: bool = False) -> None:
    self.center, self.theta, self.width, self.height = center, theta, width, height
    self.curvature = curvature
    self.wide = wide

  def polygon(self) -> np.ndarray:
    if self.curvature == 0:
      return _quad(self.center, self.theta, self.width, self.height)
    radius = self.width / self.curvature
    steps = max(4, int(math.ceil(self.curvature / 0.15)))
    span = np.linspace(-self.curvature / 2, self.curvature / 2, steps + 1)
    upper = [self._arc_point(s, radius + self.height / 2, radius) for s in span]
    lower = [self._arc_point(s, radius - self.height / 2, radius) for s in span[::-1]]
    return np.array(upper + lower)

  def _arc_point(self, s: float, r: float, radius: float) -> np.ndarray:
    local = np.array([r * math.sin(s), radius - r * math.cos(s)])
    u, v = _frame(self.theta)
    return self.center + local[0] * u + local[1] * v

  def glyph_cells(self, rng: np.random.Generator) -> list[tuple[np.ndarray, float, float, float]]:
    pitch_target = self.height * rng.uniform(0.7, 1.0)
    count = max(1, int(round(self.width / pitch_target)))
    pitch = self.width / count
    ink = rng.uniform(*(WIDE_INK_FRACTION if self.wide else INK_FRACTION))
    gw, gh = pitch * ink, self.height * rng.uniform(0.7, 0.85)
    cells = []
    for i in range(count):
      offset = (i + 0.5) * pitch - self.width / 2
      if self.curvature == 0:
        u, _ = _frame(self.theta)
        cells.append((self.center + offset * u, self.theta, gw, gh))
      else:
        radius = self.width / self.curvature
        s = offset / radius
        cells.append((self._arc_point(s, radius, radius), self.theta + s, gw, gh))
    return cells


def _fits(poly: np.ndarray, placed: list[Polygon], canvas: Polygon, spacing: float) -> Optional[Polygon]:
  shape = Polygon(poly)
  if not shape.is_valid or not canvas.contains(shape):
    return None
  if any(shape.distance(p) < spacing for p in placed):
    return None
  return shape


def gen_synth_sample(spec: SynthSceneSpec, seed: int | np.random.SeedSequence) -> tuple[np.ndarray, list[TextAnnotation]]:
  """Render one scene; the same (spec, seed) always gives the same bytes."""
  bad = spec.validate()
  if bad:
    raise SynthSpecError(f"invalid synthetic scene spec: {', '.join(bad)}")
  h, w = spec.canvas_height, spec.canvas_width
  min_block = spec.min_height * spec.min_height * spec.min_aspect
  if spec.min_height * spec.min_aspect > w - 2 or spec.min_height > h - 2:
    raise SynthSpecError(f"smallest text block ({spec.min_height * spec.min_aspect:.0f}x{spec.min_height}) "
                         f"does not fit a {w}x{h} canvas")
  if spec.min_instances * min_block > MAX_FILL * w * h:
    raise SynthSpecError(f"{spec.min_instances} instances of at least {min_block:.0f} px^2 "
                         f"cannot fit a {w}x{h} canvas")

  rng = np.random.default_rng(seed)
  image = _background(rng, h, w)
  count = int(rng.integers(spec.min_instances, spec.max_instances + 1))
  canvas = box(1, 1, w - 1, h - 1)
  placed: list[Polygon] = []
  blocks: list[_Block] = []

  def propose(wide: bool) -> _Block:
    height = rng.uniform(spec.min_height, spec.max_height)
    aspect = spec.max_aspect if wide else rng.uniform(spec.min_aspect, spec.max_aspect)
    width = min(height * aspect, w - 4)
    theta = math.radians(rng.uniform(-spec.max_rotation, spec.max_rotation))
    curvature = rng.uniform(0.5, 1.2) if spec.curved and not wide and rng.random() < 0.5 else 0.0
    center = rng.uniform([width / 2, height / 2], [w - width / 2, h - height / 2])
    return _Block(center, theta, width, height, curvature, wide)

  while len(blocks) < count:
    wide = spec.extreme_aspect and not blocks
    for _ in range(MAX_ATTEMPTS):
      block = propose(wide)
      shape = _fits(block.polygon(), placed, canvas, spec.spacing)
      if shape is not None:
        break
    else:
      if len(blocks) < spec.min_instances:
        raise SynthSpecError(f"could only place {len(blocks)} of {spec.min_instances} required instances")
      data_logger.debug(f"Stopping at {len(blocks)} of {count} instances: canvas is full")
      break
    placed.append(shape)
    blocks.append(block)

    if spec.adjacency_pairs and len(blocks) < count and block.curvature == 0 and rng.random() < 0.5:
      _, v = _frame(block.theta)
      sibling = _Block(block.center + (block.height + spec.spacing) * v, block.theta,
                       block.width * rng.uniform(0.6, 1.0), block.height)
      # Anchor the sibling's left edge to the block's left edge.
      u, _ = _frame(block.theta)
      sibling.center = sibling.center - (block.width - sibling.width) / 2 * u
      sibling_shape = _fits(sibling.polygon(), placed, canvas, spec.spacing * 0.999)
      if sibling_shape is not None:
        placed.append(sibling_shape)
        blocks.append(sibling)

  annots = []
  for block in blocks:
    poly = block.polygon()
    color = _ink(rng, image, poly)
    for center, theta, gw, gh in block.glyph_cells(rng):
      _draw_glyph(image, rng, center, theta, gw, gh, color)
    annots.append(TextAnnotation(polygon=poly, ignore=False))
  return image, annots
