"""Training objective: L = L_b + alpha * L_p + beta * L_t.

L_p is binary cross-entropy on the probability map, L_b is Dice loss on the
approximate binary map, both restricted to the OHEM-sampled set S_l; L_t is
the mean L1 distance on the threshold map inside the dilated band R_d.
L_p and L_t are means over their sets so alpha and beta do not depend on the
image size; BCE carries the usual minus sign.
"""
from dataclasses import dataclass

import torch
from torch import nn

from fdrnet.core.config import LossConfig
from fdrnet.core.grid import check_same_shape
from fdrnet.detector.detector import DetectorOutput

LOG_EPS = 1e-6
DICE_EPS = 1e-6
OHEM_RATIO = 3.0
OHEM_FALLBACK = 100


@dataclass(frozen=True)
class LossWeights:
  alpha: float = 5.0
  beta: float = 10.0

  def __post_init__(self) -> None:
    assert self.alpha > 0 and self.beta > 0, f"loss weights must be positive, got {self}"


@dataclass
class SampledSet:
  mask: torch.Tensor
  num_positive: int
  num_negative: int

  @property
  def size(self) -> int:
    return self.num_positive + self.num_negative


def ohem_select(per_pixel_loss: torch.Tensor, pos_mask: torch.Tensor, valid_mask: torch.Tensor,
                ratio: float = OHEM_RATIO, fallback_count: int = OHEM_FALLBACK) -> SampledSet:
  """Keep every valid positive and the hardest valid negatives.

  The number of negatives is min(ratio * #positives, #negatives), or
  min(fallback_count, #negatives) when there is no positive. Ties in loss are
  broken towards the lowest flat pixel index.
  """
  check_same_shape(per_pixel_loss, pos_mask, "ohem_select loss/positives")
  check_same_shape(per_pixel_loss, valid_mask, "ohem_select loss/valid")
  valid = valid_mask.bool()
  positive = pos_mask.bool() & valid
  negative = ~pos_mask.bool() & valid

  num_pos = int(positive.sum())
  num_neg_available = int(negative.sum())
  if num_pos > 0:
    num_neg = min(int(ratio * num_pos), num_neg_available)
  else:
    num_neg = min(fallback_count, num_neg_available)

  flat_loss = per_pixel_loss.detach().reshape(-1)
  flat_neg = negative.reshape(-1)
  neg_idx = torch.nonzero(flat_neg, as_tuple=False).squeeze(1)
  # Stable sort keeps ascending index order among equal losses.
  order = torch.sort(flat_loss[neg_idx], descending=True, stable=True).indices
  chosen = neg_idx[order[:num_neg]]

  selected = positive.reshape(-1).clone()
  selected[chosen] = True
  return SampledSet(mask=selected.reshape(per_pixel_loss.shape), num_positive=num_pos, num_negative=num_neg)


def per_pixel_bce(x: torch.Tensor, y: torch.Tensor, eps: float = LOG_EPS) -> torch.Tensor:
  x = x.clamp(eps, 1 - eps)
  return -(y * torch.log(x) + (1 - y) * torch.log(1 - x))


def bce_loss(x: torch.Tensor, y: torch.Tensor, sampled: SampledSet, eps: float = LOG_EPS) -> torch.Tensor:
  check_same_shape(x, y, "bce_loss")
  m = sampled.mask.to(x.dtype)
  return (per_pixel_bce(x, y, eps) * m).sum() / m.sum().clamp(min=1)


def dice_loss(x: torch.Tensor, y: torch.Tensor, sampled: SampledSet, eps: float = DICE_EPS) -> torch.Tensor:
  check_same_shape(x, y, "dice_loss")
  m = sampled.mask.to(x.dtype)
  intersection = (x * y * m).sum()
  union = (x.abs() * m).sum() + (y.abs() * m).sum() + eps
  return 1 - 2 * intersection / union


def l1_thresh_loss(x: torch.Tensor, y: torch.Tensor, region: torch.Tensor) -> torch.Tensor:
  check_same_shape(x, y, "l1_thresh_loss")
  m = region.to(x.dtype)
  count = m.sum()
  if count == 0:
    return (x * 0).sum()
  return ((y - x).abs() * m).sum() / count


def total_loss(l_p: torch.Tensor, l_b: torch.Tensor, l_t: torch.Tensor, w: LossWeights = LossWeights()) -> torch.Tensor:
  return l_b + w.alpha * l_p + w.beta * l_t


@dataclass
class LossBreakdown:
  total: torch.Tensor
  prob: torch.Tensor
  binary: torch.Tensor
  thresh: torch.Tensor

  def as_floats(self) -> dict[str, float]:
    return {"loss": float(self.total), "loss_prob": float(self.prob),
            "loss_binary": float(self.binary), "loss_thresh": float(self.thresh)}


class DetectionLoss(nn.Module):
  """Applies the three losses to a detector output and a batch of label maps.

  One OHEM set per batch, mined from the per-pixel BCE of P, is shared by the
  BCE and the Dice term.
  """

  def __init__(self, config: LossConfig = LossConfig()) -> None:
    super().__init__()
    self.config = config
    self.weights = LossWeights(config.alpha, config.beta)

  def forward(self, out: DetectorOutput, prob_gt: torch.Tensor, prob_mask: torch.Tensor,
              thresh_gt: torch.Tensor, thresh_mask: torch.Tensor) -> LossBreakdown:
    c = self.config
    prob, thresh, binary = out.prob[:, 0], out.thresh[:, 0], out.binary[:, 0]
    sampled = ohem_select(per_pixel_bce(prob, prob_gt, c.log_eps), prob_gt > 0.5, prob_mask > 0.5,
                          c.ohem_ratio, c.ohem_fallback)
    l_p = bce_loss(prob, prob_gt, sampled, c.log_eps)
    l_b = dice_loss(binary, prob_gt, sampled, c.dice_eps)
    l_t = l1_thresh_loss(thresh, thresh_gt, thresh_mask > 0.5)
    return LossBreakdown(total=total_loss(l_p, l_b, l_t, self.weights), prob=l_p, binary=l_b, thresh=l_t)
