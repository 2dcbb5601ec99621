"""Top-down pyramid fusion to a single stride-4 feature."""
from typing import Iterable, Sequence

import torch
import torch.nn.functional as F
from torch import nn

from fdrnet.core.config import PYRAMID_LEVELS
from fdrnet.core.grid import FeatureMap
from fdrnet.detector.attention import ClaPlacement, CrossLevelAttention
from fdrnet.detector.backbone import STAGE_NAMES


class FpnFusion(nn.Module):
  """
  Lateral 1x1 convolutions bring every stage to C/4 channels, a top-down
  pathway adds each upsampled coarser level, a 3x3 convolution smooths each
  level, CLA refines the configured levels, and all levels are upsampled to
  stride 4 and concatenated to C channels.
  """

  def __init__(self, in_widths: Sequence[int], fused_channels: int = 256,
               cla_placement: Iterable[str] = ("out2",), cla_reduction: int = 16,
               enable_cla: bool = True) -> None:
    super().__init__()
    inner = fused_channels // 4
    self.enable_cla = enable_cla
    self.placement = ClaPlacement(cla_placement)
    self.lateral = nn.ModuleDict({
      level: nn.Conv2d(width, inner, 1) for level, width in zip(PYRAMID_LEVELS, in_widths)})
    self.smooth = nn.ModuleDict({
      level: nn.Conv2d(inner, inner, 3, padding=1) for level in PYRAMID_LEVELS})
    self.cla = nn.ModuleDict({
      level: CrossLevelAttention(inner, cla_reduction) for level in PYRAMID_LEVELS if level in self.placement})

  def levels(self, features: dict[str, FeatureMap]) -> dict[str, FeatureMap]:
    lateral = {level: self.lateral[level](features[stage]) for level, stage in zip(PYRAMID_LEVELS, STAGE_NAMES)}

    merged: dict[str, FeatureMap] = {}
    coarser = None
    for level in reversed(PYRAMID_LEVELS):
      p = lateral[level]
      if coarser is not None:
        p = p + F.interpolate(coarser, size=p.shape[2:], mode="nearest")
      merged[level] = p
      coarser = p

    out = {}
    for level in PYRAMID_LEVELS:
      p = self.smooth[level](merged[level])
      if self.enable_cla and level in self.cla:
        p = self.cla[level](p)
      out[level] = p
    return out

  def forward(self, features: dict[str, FeatureMap]) -> FeatureMap:
    out = self.levels(features)
    size = out["out2"].shape[2:]
    return torch.cat([F.interpolate(out[level], size=size, mode="nearest") if level != "out2" else out[level]
                      for level in PYRAMID_LEVELS], dim=1)
