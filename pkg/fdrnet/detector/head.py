import torch
from torch import nn

from fdrnet.core.errors import ShapeError
from fdrnet.core.grid import FeatureMap, check_same_shape


def _prediction_branch(channels: int) -> nn.Sequential:
  quarter = max(channels // 4, 1)
  return nn.Sequential(
    nn.Conv2d(channels, quarter, 3, padding=1, bias=False),
    nn.BatchNorm2d(quarter),
    nn.ReLU(),
    nn.ConvTranspose2d(quarter, quarter, 2, stride=2),
    nn.BatchNorm2d(quarter),
    nn.ReLU(),
    nn.ConvTranspose2d(quarter, 1, 2, stride=2),
    nn.Sigmoid(),
  )


class DBHead(nn.Module):
  """Two parallel branches predicting the probability map and the threshold map at 4x resolution."""

  def __init__(self, channels: int = 256) -> None:
    super().__init__()
    self.channels = channels
    self.prob = _prediction_branch(channels)
    self.thresh = _prediction_branch(channels)

  def forward(self, f: FeatureMap) -> tuple[torch.Tensor, torch.Tensor]:
    if f.shape[1] != self.channels:
      raise ShapeError(f"head built for {self.channels} channels, got {f.shape[1]}")
    return self.prob(f), self.thresh(f)


def approx_binarize(prob: torch.Tensor, thresh: torch.Tensor, k: float = 50.0) -> torch.Tensor:
  """B = 1 / (1 + exp(-k (P - T)))."""
  check_same_shape(prob, thresh, "approx_binarize")
  assert k > 0, f"binarization steepness must be positive, got {k}"
  return torch.sigmoid(k * (prob - thresh))
