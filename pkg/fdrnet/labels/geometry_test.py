import math
import unittest

import numpy as np

from fdrnet.core.errors import GeometryError
from fdrnet.labels.geometry import (as_polygon, boundary_distance, clip_polygon, dilate_polygon, offset_distance,
                                    offset_polygon, polygon_area, rasterize, rasterize_polygon, shrink_polygon)

SQUARE = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=np.float64)
RECT = np.array([[0, 0], [100, 0], [100, 20], [0, 20]], dtype=np.float64)


def _star_polygon(rng: np.random.Generator) -> np.ndarray:
  """A random polygon that is star-shaped around its centre, hence simple."""
  n = int(rng.integers(4, 12))
  angles = (np.arange(n) + rng.uniform(0, 0.8, n)) * 2 * math.pi / n
  radii = rng.uniform(20, 60, n)
  center = rng.uniform(80, 120, 2)
  return np.stack([center[0] + radii * np.cos(angles), center[1] + radii * np.sin(angles)], axis=1)


class TestOffsetDistance(unittest.TestCase):
  def test_unit_square(self) -> None:
    self.assertAlmostEqual(offset_distance(SQUARE, 0.4), 0.21, delta=1e-12)

  def test_rectangle(self) -> None:
    self.assertAlmostEqual(offset_distance(RECT, 0.4), 2000 * 0.84 / 240, delta=1e-12)

  def test_ratio_range(self) -> None:
    for r in (0.0, 1.0, -0.5, 1.5):
      with self.subTest(r=r), self.assertRaises(GeometryError):
        offset_distance(SQUARE, r)


class TestOffsetPolygon(unittest.TestCase):
  def test_shrunk_rectangle(self) -> None:
    shrunk = shrink_polygon(RECT, 7.0)
    self.assertAlmostEqual(polygon_area(shrunk), 86 * 6, delta=0.01)
    np.testing.assert_allclose(shrunk.min(axis=0), [7, 7], atol=1e-3)
    np.testing.assert_allclose(shrunk.max(axis=0), [93, 13], atol=1e-3)

  def test_dilated_corners_are_round(self) -> None:
    square = SQUARE * 10
    dilated = dilate_polygon(square, 1.0)
    self.assertAlmostEqual(polygon_area(dilated), 100 + 40 + math.pi, delta=0.1)

  def test_zero_distance_is_a_copy(self) -> None:
    out = offset_polygon(RECT, 0)
    np.testing.assert_array_equal(out, RECT)
    self.assertIsNot(out, RECT)

  def test_vanishing(self) -> None:
    self.assertIsNone(shrink_polygon(SQUARE * 4, 3.0))

  def test_negative_distances(self) -> None:
    with self.assertRaises(GeometryError):
      shrink_polygon(RECT, -1.0)
    with self.assertRaises(GeometryError):
      dilate_polygon(RECT, -1.0)

  def test_shrunk_inside_original_inside_dilated(self) -> None:
    rng = np.random.default_rng(3)
    for _ in range(500):
      poly = _star_polygon(rng)
      d = offset_distance(poly, 0.4)
      original = as_polygon(poly)
      grown = dilate_polygon(poly, d)
      self.assertTrue(as_polygon(grown).buffer(1e-3).contains(original))
      outer = rasterize_polygon(grown, 220, 220)
      inner = rasterize_polygon(poly, 220, 220)
      self.assertFalse((inner & ~outer).any())
      shrunk = shrink_polygon(poly, d)
      if shrunk is not None:
        self.assertTrue(original.buffer(1e-3).contains(as_polygon(shrunk)))
        self.assertLess(polygon_area(shrunk), original.area)
        self.assertFalse((rasterize_polygon(shrunk, 220, 220) & ~inner).any())


class TestRasterize(unittest.TestCase):
  def test_pixel_centres(self) -> None:
    poly = np.array([[0, 0], [4, 0], [4, 3], [0, 3]], dtype=np.float64)
    mask = rasterize_polygon(poly, 5, 6)
    expected = np.zeros((5, 6), dtype=bool)
    expected[:3, :4] = True
    np.testing.assert_array_equal(mask, expected)

  def test_outside_canvas(self) -> None:
    poly = np.array([[50, 50], [60, 50], [60, 60]], dtype=np.float64)
    self.assertFalse(rasterize_polygon(poly, 10, 10).any())

  def test_union(self) -> None:
    a = np.array([[0, 0], [2, 0], [2, 2], [0, 2]], dtype=np.float64)
    mask = rasterize([a, a + 4], 8, 8)
    self.assertEqual(int(mask.sum()), 8)

  def test_clip_is_an_intersection(self) -> None:
    slanted = np.array([[-40, 0], [20, 0], [20, 10], [-40, 30]], dtype=np.float64)
    clipped = clip_polygon(slanted, 40, 40)
    self.assertAlmostEqual(polygon_area(clipped), as_polygon(slanted).intersection(as_polygon(SQUARE * 40)).area,
                           delta=1e-9)
    inside = rasterize_polygon(slanted, 40, 40)
    np.testing.assert_array_equal(rasterize_polygon(clipped, 40, 40), inside)

  def test_clip_edge_cases(self) -> None:
    np.testing.assert_array_equal(clip_polygon(RECT, 100, 20), RECT)
    self.assertIsNone(clip_polygon(RECT + 200, 100, 20))
    self.assertIsNone(clip_polygon(np.array([[0, 0], [5, 5], [10, 10]]), 20, 20))


class TestBoundaryDistance(unittest.TestCase):
  def test_inside_and_outside(self) -> None:
    square = SQUARE * 10
    d = boundary_distance(square, np.array([5.0, 15.0, 13.0, 2.0]), np.array([5.0, 5.0, 14.0, 1.0]))
    np.testing.assert_allclose(d, [5.0, 5.0, 5.0, 1.0], atol=1e-12)


if __name__ == "__main__":
  unittest.main()
