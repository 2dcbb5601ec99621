"""Differentiable grid primitives shared by the network modules.

A feature map is a 4-D tensor laid out as (N, C, H, W). A flow field is a
(N, 2, H, W) tensor of per-pixel offsets in pixel units; channel 0 holds dx
(columns) and channel 1 holds dy (rows), so a pixel p is sampled from
p' = p + phi(p).
"""
from enum import Enum

import torch
import torch.nn.functional as F

from fdrnet.core.errors import ShapeError

FeatureMap = torch.Tensor
FlowField = torch.Tensor


class PoolMode(Enum):
  AVG = "avg"
  MAX = "max"


def check_feature_map(f: FeatureMap, name: str = "feature map") -> None:
  if f.dim() != 4:
    raise ShapeError(f"{name} must be (N, C, H, W), got shape {tuple(f.shape)}")
  if f.numel() == 0:
    raise ShapeError(f"{name} is empty: shape {tuple(f.shape)}")


def check_flow_field(flow: FlowField, f: FeatureMap) -> None:
  if flow.dim() != 4 or flow.shape[1] != 2:
    raise ShapeError(f"flow field must be (N, 2, H, W), got shape {tuple(flow.shape)}")
  if flow.shape[0] != f.shape[0] or flow.shape[2:] != f.shape[2:]:
    raise ShapeError(f"flow field {tuple(flow.shape)} does not match feature map {tuple(f.shape)}")


def check_same_shape(a: torch.Tensor, b: torch.Tensor, what: str) -> None:
  if a.shape != b.shape:
    raise ShapeError(f"{what}: shapes differ, {tuple(a.shape)} vs {tuple(b.shape)}")


def bilinear_sample(f: FeatureMap, flow: FlowField) -> FeatureMap:
  """Warp `f` by `flow` using the four nearest neighbours of every target.

  Targets outside the grid are clamped to the border. A zero flow returns `f`
  bit-for-bit, which `grid_sample`'s normalised coordinates cannot promise.
  """
  check_feature_map(f)
  check_flow_field(flow, f)
  n, c, h, w = f.shape

  ys = torch.arange(h, dtype=f.dtype, device=f.device).view(1, h, 1)
  xs = torch.arange(w, dtype=f.dtype, device=f.device).view(1, 1, w)
  tx = (xs + flow[:, 0]).clamp(0, w - 1)
  ty = (ys + flow[:, 1]).clamp(0, h - 1)

  x0 = tx.detach().floor()
  y0 = ty.detach().floor()
  wx = (tx - x0).unsqueeze(1)
  wy = (ty - y0).unsqueeze(1)

  x0i = x0.long()
  y0i = y0.long()
  x1i = (x0i + 1).clamp(max=w - 1)
  y1i = (y0i + 1).clamp(max=h - 1)

  flat = f.reshape(n, c, h * w)

  def gather(yi: torch.Tensor, xi: torch.Tensor) -> torch.Tensor:
    idx = (yi * w + xi).reshape(n, 1, h * w).expand(n, c, h * w)
    return flat.gather(2, idx).reshape(n, c, h, w)

  return (gather(y0i, x0i) * ((1 - wx) * (1 - wy))
          + gather(y0i, x1i) * (wx * (1 - wy))
          + gather(y1i, x0i) * ((1 - wx) * wy)
          + gather(y1i, x1i) * (wx * wy))


def global_pool(f: FeatureMap, mode: PoolMode) -> torch.Tensor:
  """Squeeze the spatial dimensions: returns (N, C)."""
  check_feature_map(f)
  if mode is PoolMode.AVG:
    return f.mean(dim=(2, 3))
  return f.amax(dim=(2, 3))


def channelwise_pool(f: FeatureMap, mode: PoolMode) -> FeatureMap:
  """Reduce over channels at every pixel: returns (N, 1, H, W)."""
  check_feature_map(f)
  if mode is PoolMode.AVG:
    return f.mean(dim=1, keepdim=True)
  return f.amax(dim=1, keepdim=True)


def resize_bilinear(f: FeatureMap, size: tuple[int, int]) -> FeatureMap:
  check_feature_map(f)
  if tuple(f.shape[2:]) == tuple(size):
    return f
  return F.interpolate(f, size=size, mode="bilinear", align_corners=False)
