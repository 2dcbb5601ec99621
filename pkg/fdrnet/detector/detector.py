from dataclasses import dataclass
from typing import Optional

import torch
from torch import nn

from fdrnet.core.config import DetectorConfig
from fdrnet.core.grid import FeatureMap, resize_bilinear
from fdrnet.detector.backbone import STAGE_NAMES, BackboneSpec, ToyBackbone
from fdrnet.detector.fdr import FeatureDecompositionReconstruction
from fdrnet.detector.fpn import FpnFusion
from fdrnet.detector.head import DBHead, approx_binarize


@dataclass
class DetectorOutput:
  prob: torch.Tensor
  thresh: torch.Tensor
  binary: torch.Tensor


class FdrNet(nn.Module):
  """Backbone -> FPN fusion (+CLA) -> FDR -> DB head.

  Disabled modules are still built so that every configuration owns the same
  parameters; they are simply bypassed and receive no gradient.
  """

  def __init__(self, config: Optional[DetectorConfig] = None) -> None:
    super().__init__()
    self.config = config or DetectorConfig()
    config = self.config
    widths = tuple(config.backbone_widths)
    c = config.fused_channels

    self.backbone = ToyBackbone(BackboneSpec(widths=widths))
    self.fpn = FpnFusion(widths, c, config.cla_placement, config.cla_reduction, config.enable_cla)
    stage_width = widths[STAGE_NAMES.index(config.low_level_stage)]
    self.low_level = nn.Conv2d(stage_width, config.low_level_channels, 1)
    self.fdr = FeatureDecompositionReconstruction(c, config.low_level_channels, config.fusion_kernel)
    # Stable hook point for the feature handed to the head.
    self.final_feature = nn.Identity()
    self.head = DBHead(c)

  def neck(self, image: FeatureMap) -> FeatureMap:
    features = self.backbone(image)
    fused = self.fpn(features)
    if self.config.enable_fdr:
      f_s = resize_bilinear(self.low_level(features[self.config.low_level_stage]), tuple(fused.shape[2:]))
      fused = self.fdr(fused, f_s)
    return self.final_feature(fused)

  def forward(self, image: FeatureMap) -> DetectorOutput:
    prob, thresh = self.head(self.neck(image))
    return DetectorOutput(prob=prob, thresh=thresh, binary=approx_binarize(prob, thresh, self.config.k))
