"""Feature decomposition-reconstruction.

The fused feature F is warped by a learned flow field into a smooth
"low frequency" term; the residual F - F_low is the "high frequency" term,
which is fused with low-level backbone features and added back.
"""
import torch
import torch.nn.functional as F
from torch import nn

from fdrnet.core.errors import ShapeError
from fdrnet.core.grid import (FeatureMap, FlowField, bilinear_sample, check_feature_map,
                              check_same_shape)


def decompose(f: FeatureMap, flow: FlowField) -> tuple[FeatureMap, FeatureMap]:
  f_low = bilinear_sample(f, flow)
  return f_low, f - f_low


def reconstruct(f_low: FeatureMap, f_high: FeatureMap) -> FeatureMap:
  check_same_shape(f_low, f_high, "reconstruct")
  return f_low + f_high


class FeatureDecompositionReconstruction(nn.Module):
  """
  Attributes:
      down (nn.Sequential): two stride-2 3x3 convolutions producing F_down.
      flow (nn.Conv2d): 3x3 convolution predicting (dx, dy) from [F ; up(F_down)].
      fuse (nn.Conv2d): fusion convolution of [F - F_low ; F_s] back to C channels.
  """

  def __init__(self, channels: int = 256, low_level_channels: int = 48, fusion_kernel: int = 3) -> None:
    super().__init__()
    self.channels = channels
    self.low_level_channels = low_level_channels
    self.down = nn.Sequential(
      nn.Conv2d(channels, channels, 3, stride=2, padding=1),
      nn.ReLU(),
      nn.Conv2d(channels, channels, 3, stride=2, padding=1),
      nn.ReLU(),
    )
    self.flow = nn.Conv2d(2 * channels, 2, 3, padding=1)
    self.fuse = nn.Conv2d(channels + low_level_channels, channels, fusion_kernel, padding=fusion_kernel // 2)

  def gen_flow_field(self, f: FeatureMap) -> FlowField:
    check_feature_map(f)
    h, w = f.shape[2:]
    if h % 4 or w % 4:
      raise ShapeError(f"flow field generation needs H and W divisible by 4, got {h}x{w}")
    f_down = self.down(f)
    f_up = F.interpolate(f_down, size=(h, w), mode="bilinear", align_corners=False)
    return self.flow(torch.cat([f, f_up], dim=1))

  def fuse_high(self, f_high_raw: FeatureMap, f_s: FeatureMap) -> FeatureMap:
    check_feature_map(f_s, "low-level feature")
    if f_high_raw.shape[1] != self.channels or f_s.shape[1] != self.low_level_channels:
      raise ShapeError(f"fusion expects {self.channels}+{self.low_level_channels} channels, "
                       f"got {f_high_raw.shape[1]}+{f_s.shape[1]}")
    if f_s.shape[2:] != f_high_raw.shape[2:]:
      raise ShapeError(f"low-level feature {tuple(f_s.shape[2:])} must be resampled to "
                       f"{tuple(f_high_raw.shape[2:])} before fusion")
    return self.fuse(torch.cat([f_high_raw, f_s], dim=1))

  def forward(self, f: FeatureMap, f_s: FeatureMap) -> FeatureMap:
    flow = self.gen_flow_field(f)
    f_low, f_high_raw = decompose(f, flow)
    return reconstruct(f_low, self.fuse_high(f_high_raw, f_s))

