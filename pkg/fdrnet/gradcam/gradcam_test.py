import tempfile
import unittest
from pathlib import Path

import numpy as np
import torch

from fdrnet.core.config import DetectorConfig
from fdrnet.core.errors import ShapeError
from fdrnet.detector.detector import FdrNet
from fdrnet.evaluation.postprocess import Detection
from fdrnet.gradcam.gradcam import (CamLayer, GradCam, comparison_panel, gradcam_heatmap, gradcam_weights,
                                    render_heatmap, seg_target_scalar, target_layer, write_raw)


def _model() -> FdrNet:
  torch.manual_seed(0)
  config = DetectorConfig(backbone_widths=[8, 8, 16, 16], fused_channels=32, low_level_channels=8, cla_reduction=4)
  return FdrNet(config).double().eval()


class TestHeatMapMath(unittest.TestCase):
  def test_weights_are_spatial_means(self) -> None:
    grad = torch.arange(24, dtype=torch.float64).reshape(2, 3, 4)
    np.testing.assert_allclose(gradcam_weights(grad).numpy(), [5.5, 17.5])
    self.assertEqual(tuple(gradcam_weights(grad[None]).shape), (1, 2))

  def test_hand_value(self) -> None:
    acts = torch.tensor([[[1.0, -1.0], [0.0, 2.0]], [[4.0, 0.0], [-8.0, 1.0]]], dtype=torch.float64)
    heat = gradcam_heatmap(torch.tensor([2.0, 0.5], dtype=torch.float64), acts)
    np.testing.assert_allclose(heat.raw, [[4.0, 0.0], [0.0, 4.5]])
    np.testing.assert_allclose(heat.normalized, [[4.0 / 4.5, 0.0], [0.0, 1.0]])

  def test_cancellation_gives_all_zero(self) -> None:
    acts = torch.rand(1, 5, 5, dtype=torch.float64).repeat(2, 1, 1)
    heat = gradcam_heatmap(torch.tensor([1.0, -1.0], dtype=torch.float64), acts, size=(10, 10))
    self.assertTrue((heat.raw == 0).all())
    self.assertEqual(heat.normalized.shape, (10, 10))
    self.assertTrue((heat.normalized == 0).all())

  def test_positive_scaling_does_not_change_normalized_map(self) -> None:
    gen = torch.Generator().manual_seed(3)
    acts = torch.randn(4, 6, 6, generator=gen, dtype=torch.float64)
    alpha = torch.randn(4, generator=gen, dtype=torch.float64)
    a = gradcam_heatmap(alpha, acts, size=(12, 12))
    b = gradcam_heatmap(alpha * 7.5, acts, size=(12, 12))
    np.testing.assert_allclose(a.normalized, b.normalized, rtol=0, atol=1e-12)
    np.testing.assert_allclose(b.raw, 7.5 * a.raw, rtol=1e-12, atol=1e-12)

  def test_shape_mismatch(self) -> None:
    with self.assertRaises(ShapeError):
      gradcam_heatmap(torch.ones(3), torch.ones(2, 4, 4))

  def test_region_target(self) -> None:
    prob = torch.arange(16, dtype=torch.float64).reshape(1, 1, 4, 4)
    self.assertEqual(seg_target_scalar(prob).item(), 120.0)
    self.assertEqual(seg_target_scalar(prob, (1, 2, 3, 4)).item(), 9 + 10 + 13 + 14)


class TestGradCam(unittest.TestCase):
  def setUp(self) -> None:
    self.model = _model()
    self.image = torch.randn(1, 3, 64, 96, generator=torch.Generator().manual_seed(1), dtype=torch.float64)

  def test_weights_match_direct_gradient(self) -> None:
    with GradCam(self.model, CamLayer.FINAL) as cam:
      heat, out = cam(self.image)
      alpha = gradcam_weights(cam.gradients[0])
    feature = self.model.neck(self.image).detach().requires_grad_(True)
    prob, _ = self.model.head(feature)
    (grad,) = torch.autograd.grad(prob.sum(), feature)
    np.testing.assert_allclose(alpha.numpy(), grad[0].mean(dim=(-2, -1)).numpy(), rtol=0, atol=1e-10)
    self.assertEqual(tuple(out.prob.shape), (1, 1, 64, 96))

  def test_heat_map_range_and_size(self) -> None:
    for layer, size in ((CamLayer.FINAL, (16, 24)), (CamLayer.STAGE4, (2, 3))):
      with GradCam(self.model, layer) as cam:
        heat, _ = cam(self.image)
      with self.subTest(layer=layer):
        self.assertEqual(heat.raw.shape, size)
        self.assertEqual(heat.normalized.shape, (64, 96))
        self.assertTrue((heat.raw >= 0).all())
        self.assertTrue(((heat.normalized >= 0) & (heat.normalized <= 1)).all())

  def test_layer_selection(self) -> None:
    self.assertIs(target_layer(self.model, CamLayer.STAGE4), self.model.backbone.stages["conv5"])
    self.assertIs(target_layer(self.model, CamLayer.FINAL), self.model.final_feature)
    self.assertEqual(CamLayer("stage4"), CamLayer.STAGE4)

  def test_region_changes_target(self) -> None:
    with GradCam(self.model) as cam:
      cam(self.image, region=(0, 0, 16, 16))
      local = gradcam_weights(cam.gradients[0]).clone()
      cam(self.image)
      full = gradcam_weights(cam.gradients[0])
    self.assertFalse(torch.allclose(local, full))

  def test_hook_removed_on_exit(self) -> None:
    with GradCam(self.model) as cam:
      cam(self.image)
    seen = cam.activations
    with torch.no_grad():
      self.model(torch.zeros(1, 3, 32, 32, dtype=torch.float64))
    self.assertIs(cam.activations, seen)

  def test_outputs(self) -> None:
    with GradCam(self.model) as cam:
      heat, _ = cam(self.image)
    image = np.zeros((64, 96, 3), dtype=np.uint8)
    self.assertEqual(render_heatmap(image, heat).shape, (64, 96, 3))
    box = np.array([[4, 4], [30, 4], [30, 20], [4, 20]], dtype=np.float64)
    panel = comparison_panel(image, ([Detection(box, 0.9)], heat), ([], heat))
    self.assertEqual(panel.shape, (64, 384, 3))
    with tempfile.TemporaryDirectory() as tmp:
      path = Path(tmp) / "raw.csv"
      write_raw(path, heat)
      np.testing.assert_allclose(np.loadtxt(path, delimiter=","), heat.raw, rtol=1e-9, atol=1e-300)


if __name__ == "__main__":
  unittest.main()
