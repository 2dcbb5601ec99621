"""A small plain convolutional backbone with four outputs at strides 4, 8, 16 and 32."""
from dataclasses import dataclass

from torch import nn

from fdrnet.core.errors import ShapeError
from fdrnet.core.grid import FeatureMap

STAGE_NAMES = ("conv2", "conv3", "conv4", "conv5")
STRIDES = (4, 8, 16, 32)


@dataclass(frozen=True)
class BackboneSpec:
  widths: tuple[int, int, int, int] = (16, 32, 64, 128)
  in_channels: int = 3

  def __post_init__(self) -> None:
    assert len(self.widths) == 4, f"backbone needs exactly four stage widths, got {self.widths}"


def _conv_bn_relu(cin: int, cout: int, stride: int) -> list[nn.Module]:
  return [nn.Conv2d(cin, cout, 3, stride=stride, padding=1, bias=False), nn.BatchNorm2d(cout), nn.ReLU()]


class ToyBackbone(nn.Module):
  """A stride-2 stem then four stages, each opening with a stride-2 convolution."""

  def __init__(self, spec: BackboneSpec = BackboneSpec()) -> None:
    super().__init__()
    self.spec = spec
    w = spec.widths
    self.stem = nn.Sequential(*_conv_bn_relu(spec.in_channels, w[0], 2))
    cins = (w[0], w[0], w[1], w[2])
    self.stages = nn.ModuleDict({
      name: nn.Sequential(*_conv_bn_relu(cin, cout, 2), *_conv_bn_relu(cout, cout, 1))
      for name, cin, cout in zip(STAGE_NAMES, cins, w)
    })

  def forward(self, image: FeatureMap) -> dict[str, FeatureMap]:
    h, w = image.shape[2:]
    if h % 32 or w % 32:
      raise ShapeError(f"backbone input must be divisible by 32, got {h}x{w}; resize or pad first")
    x = self.stem(image)
    outs = {}
    for name, stage in self.stages.items():
      x = stage(x)
      outs[name] = x
    return outs

