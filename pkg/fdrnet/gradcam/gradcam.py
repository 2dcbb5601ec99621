"""Grad-CAM for the segmentation output.

The backpropagated scalar is the sum of the probability map (optionally over a
box only), so the heat map shows which activations raise text confidence
anywhere in the image rather than for one class.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from fdrnet.core.errors import ShapeError
from fdrnet.core.grid import FeatureMap
from fdrnet.core.logger import eval_logger
from fdrnet.detector.detector import DetectorOutput, FdrNet
from fdrnet.evaluation.postprocess import Detection
from fdrnet.evaluation.visualize import overlay, render_detections

Box = tuple[int, int, int, int]  # (x0, y0, x1, y1), end-exclusive


class CamLayer(Enum):
  STAGE4 = "stage4"
  FINAL = "final"


def target_layer(model: FdrNet, layer: CamLayer) -> nn.Module:
  """`stage4` is the last backbone stage, `final` the feature handed to the head."""
  if layer is CamLayer.STAGE4:
    return model.backbone.stages["conv5"]
  return model.final_feature


def seg_target_scalar(prob: torch.Tensor, region: Optional[Box] = None) -> torch.Tensor:
  if region is None:
    return prob.sum()
  x0, y0, x1, y1 = region
  return prob[..., y0:y1, x0:x1].sum()


def gradcam_weights(grad: FeatureMap) -> torch.Tensor:
  """Mean gradient per channel: (C, H, W) -> (C,), (N, C, H, W) -> (N, C)."""
  return grad.mean(dim=(-2, -1))


@dataclass
class HeatMap:
  raw: np.ndarray  # ReLU(sum_k alpha_k A^k) at layer resolution
  normalized: np.ndarray  # min-max scaled to [0, 1], resized for rendering


def gradcam_heatmap(alpha: torch.Tensor, activations: FeatureMap,
                    size: Optional[tuple[int, int]] = None) -> HeatMap:
  """alpha (C,) and activations (C, H, W) of one image."""
  if alpha.dim() != 1 or activations.dim() != 3 or alpha.shape[0] != activations.shape[0]:
    raise ShapeError(f"expected alpha (C,) and activations (C, H, W), got {tuple(alpha.shape)} "
                     f"and {tuple(activations.shape)}")
  raw = F.relu((alpha[:, None, None] * activations).sum(dim=0)).detach()
  resized = raw
  if size is not None and tuple(raw.shape) != tuple(size):
    resized = F.interpolate(raw[None, None], size=size, mode="bilinear", align_corners=False)[0, 0]
  lo, hi = float(resized.min()), float(resized.max())
  if hi > lo:
    normalized = (resized - lo) / (hi - lo)
  else:
    normalized = torch.zeros_like(resized)
  return HeatMap(raw=raw.double().numpy(), normalized=normalized.double().numpy())


class GradCam:
  """Captures one layer's activation and its gradient for a single image.

  Use as a context manager so the hook is removed afterwards.
  """

  def __init__(self, model: FdrNet, layer: CamLayer = CamLayer.FINAL) -> None:
    self.model = model
    self.layer = layer
    self.activations: Optional[torch.Tensor] = None
    self.gradients: Optional[torch.Tensor] = None
    self._handle = target_layer(model, layer).register_forward_hook(self._forward_hook)

  def _forward_hook(self, module: nn.Module, inputs, output: torch.Tensor) -> None:
    self.activations = output

    def save(grad: torch.Tensor) -> None:
      self.gradients = grad

    if output.requires_grad:
      output.register_hook(save)

  def close(self) -> None:
    self._handle.remove()

  def __enter__(self) -> GradCam:
    return self

  def __exit__(self, *exc) -> None:
    self.close()

  def __call__(self, image: torch.Tensor, region: Optional[Box] = None) -> tuple[HeatMap, DetectorOutput]:
    """`image` is a normalized (1, 3, H, W) tensor; the heat map is resized to H x W."""
    self.model.eval()
    self.model.zero_grad(set_to_none=True)
    image = image.detach().requires_grad_(True)
    out = self.model(image)
    target = seg_target_scalar(out.prob, region)
    target.backward()
    assert self.activations is not None and self.gradients is not None, "target layer was not reached"

    alpha = gradcam_weights(self.gradients[0])
    heat = gradcam_heatmap(alpha, self.activations[0].detach(), tuple(image.shape[2:]))
    eval_logger.bind(component="gradcam").debug(
      f"{self.layer.value}: target {float(target):.3f}, activations {tuple(self.activations.shape)}, "
      f"heat max {heat.raw.max():.3e}")
    return heat, out


def render_heatmap(image: np.ndarray, heat: HeatMap) -> np.ndarray:
  h, w = image.shape[:2]
  return overlay(image, heat.normalized[:h, :w], alpha=0.5)


def write_raw(path: str | Path, heat: HeatMap) -> None:
  np.savetxt(path, heat.raw, delimiter=",", fmt="%.10e")


def comparison_panel(image: np.ndarray, baseline: tuple[Sequence[Detection], HeatMap],
                     candidate: tuple[Sequence[Detection], HeatMap]) -> np.ndarray:
  """Baseline detections | baseline heat map | candidate detections | candidate heat map."""
  panels = []
  for dets, heat in (baseline, candidate):
    panels.append(render_detections(image, dets))
    panels.append(render_heatmap(image, heat))
  return np.concatenate(panels, axis=1)
