import itertools
import unittest

import numpy as np
from shapely.geometry import Polygon, box

from fdrnet.core.config import SynthSceneSpec
from fdrnet.core.errors import SynthSpecError
from fdrnet.training.synth import gen_synth_sample


class TestSynth(unittest.TestCase):
  def test_same_seed_same_scene(self) -> None:
    spec = SynthSceneSpec(curved=True)
    a_img, a_ann = gen_synth_sample(spec, 11)
    b_img, b_ann = gen_synth_sample(spec, 11)
    self.assertEqual(a_img.tobytes(), b_img.tobytes())
    self.assertEqual([a.polygon.tolist() for a in a_ann], [b.polygon.tolist() for b in b_ann])
    c_img, _ = gen_synth_sample(spec, 12)
    self.assertNotEqual(a_img.tobytes(), c_img.tobytes())

  def test_image_format(self) -> None:
    image, _ = gen_synth_sample(SynthSceneSpec(canvas_width=160, canvas_height=96), 0)
    self.assertEqual(image.shape, (96, 160, 3))
    self.assertEqual(image.dtype, np.uint8)

  def test_zero_instances(self) -> None:
    image, annots = gen_synth_sample(SynthSceneSpec(min_instances=0, max_instances=0), 3)
    self.assertEqual(annots, [])
    self.assertEqual(image.shape, (256, 256, 3))

  def test_polygons_are_simple_separated_and_inside(self) -> None:
    for seed, curved in itertools.product(range(8), (False, True)):
      spec = SynthSceneSpec(curved=curved)
      _, annots = gen_synth_sample(spec, seed)
      canvas = box(0, 0, spec.canvas_width, spec.canvas_height)
      shapes = [Polygon(a.polygon) for a in annots]
      with self.subTest(seed=seed, curved=curved):
        self.assertGreaterEqual(len(annots), spec.min_instances)
        self.assertLessEqual(len(annots), spec.max_instances)
        for a, shape in zip(annots, shapes):
          self.assertTrue(a.is_simple)
          self.assertTrue(canvas.contains(shape))
          self.assertFalse(a.ignore)
        for s, t in itertools.combinations(shapes, 2):
          self.assertGreaterEqual(s.distance(t), spec.spacing * 0.999 - 1e-9)

  def test_extreme_aspect_block_comes_first(self) -> None:
    spec = SynthSceneSpec(max_height=20, max_aspect=8.0)
    for seed in range(5):
      _, annots = gen_synth_sample(spec, seed)
      p = annots[0].polygon
      width, height = np.linalg.norm(p[1] - p[0]), np.linalg.norm(p[3] - p[0])
      self.assertAlmostEqual(width / height, 8.0, places=9)

  def test_text_is_drawn(self) -> None:
    image, annots = gen_synth_sample(SynthSceneSpec(min_instances=1, max_instances=1, extreme_aspect=False), 2)
    background, _ = gen_synth_sample(SynthSceneSpec(min_instances=0, max_instances=0), 2)
    self.assertEqual(len(annots), 1)
    self.assertGreater(np.count_nonzero(image != background), 0)

  def test_unsatisfiable_specs(self) -> None:
    for spec in (SynthSceneSpec(min_instances=40, max_instances=40, min_height=30, max_height=32),
                 SynthSceneSpec(canvas_width=64, canvas_height=64, min_height=20, min_aspect=4.0),
                 SynthSceneSpec(min_instances=3, max_instances=2)):
      with self.subTest(spec=spec), self.assertRaises(SynthSpecError):
        gen_synth_sample(spec, 0)


if __name__ == "__main__":
  unittest.main()
