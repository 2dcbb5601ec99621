"""Cross-level attention: channel attention followed by spatial attention."""
from typing import Iterable

import torch
from torch import nn

from fdrnet.core.config import PYRAMID_LEVELS
from fdrnet.core.errors import ConfigError, ShapeError
from fdrnet.core.grid import FeatureMap, PoolMode, channelwise_pool, check_feature_map, global_pool

SPATIAL_KERNEL = 7


class ChannelAttention(nn.Module):
  """A_c = sigmoid(MLP(avgpool(F)) + MLP(maxpool(F))), one MLP shared by both descriptors."""

  def __init__(self, channels: int, reduction: int = 16) -> None:
    super().__init__()
    self.channels = channels
    hidden = max(channels // reduction, 1)
    self.mlp = nn.Sequential(
      nn.Linear(channels, hidden),
      nn.ReLU(),
      nn.Linear(hidden, channels),
    )

  def forward(self, f: FeatureMap) -> torch.Tensor:
    check_feature_map(f)
    if f.shape[1] != self.channels:
      raise ShapeError(f"channel attention built for {self.channels} channels, got {f.shape[1]}")
    return torch.sigmoid(self.mlp(global_pool(f, PoolMode.AVG)) + self.mlp(global_pool(f, PoolMode.MAX)))


class SpatialAttention(nn.Module):
  """A_s = sigmoid(conv7x7([channel max; channel avg]))."""

  def __init__(self) -> None:
    super().__init__()
    self.conv = nn.Conv2d(2, 1, SPATIAL_KERNEL, padding=SPATIAL_KERNEL // 2)

  def forward(self, f: FeatureMap) -> FeatureMap:
    check_feature_map(f)
    descriptor = torch.cat([channelwise_pool(f, PoolMode.MAX), channelwise_pool(f, PoolMode.AVG)], dim=1)
    return torch.sigmoid(self.conv(descriptor))


class CrossLevelAttention(nn.Module):
  """Channel gate, then spatial gate computed on the channel-refined map."""

  def __init__(self, channels: int, reduction: int = 16) -> None:
    super().__init__()
    self.channel = ChannelAttention(channels, reduction)
    self.spatial = SpatialAttention()

  def forward(self, f: FeatureMap) -> FeatureMap:
    return cla_apply(f, self.channel, self.spatial)


def cla_apply(f: FeatureMap, cp: ChannelAttention, sp: SpatialAttention) -> FeatureMap:
  refined = cp(f)[:, :, None, None] * f
  return sp(refined) * refined


class ClaPlacement(frozenset):
  """The pyramid levels that carry a CLA module."""

  def __new__(cls, levels: Iterable[str]):
    levels = frozenset(levels)
    if not levels:
      raise ConfigError("CLA placement must name at least one pyramid level")
    unknown = sorted(levels - set(PYRAMID_LEVELS))
    if unknown:
      raise ConfigError(f"unknown pyramid levels in CLA placement: {', '.join(unknown)}")
    return super().__new__(cls, levels)

  def __repr__(self) -> str:
    return f"ClaPlacement({sorted(self)})"
