"""Flat-keyed run configuration.

Every key is `section.name`; the file is TOML, so both `[train]` tables and
dotted keys (`train.lr0 = 0.007`) work. Defaults below are the reference
training recipe; `max_iter` replaces the reference "epochs" count
(max_iter = epochs * ceil(corpus_size / batch_size)).
"""
from __future__ import annotations

import dataclasses

try:
  import tomllib
except ModuleNotFoundError:  # Python < 3.11
  import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from fdrnet.core.errors import ConfigError

PYRAMID_LEVELS = ("out2", "out3", "out4", "out5")
LOW_LEVEL_STAGES = ("conv2", "conv3")


@dataclass
class TrainConfig:
  lr0: float = 0.007
  power: float = 0.9
  weight_decay: float = 1e-4
  momentum: float = 0.9
  nesterov: bool = True
  batch_size: int = 8
  max_iter: int = 2000
  image_size: int = 640
  seed: int = 0
  precision: str = "float32"
  checkpoint_interval: int = 500
  log_interval: int = 10
  num_workers: int = 4

  def validate(self) -> list[str]:
    bad = [f"train.{k}" for k in ("lr0", "power", "momentum", "batch_size", "max_iter",
                                  "image_size", "checkpoint_interval", "log_interval", "num_workers")
           if getattr(self, k) <= 0]
    if self.weight_decay < 0:
      bad.append("train.weight_decay")
    if self.image_size % 32:
      bad.append("train.image_size")
    if self.precision not in ("float32", "float64"):
      bad.append("train.precision")
    return bad


@dataclass
class DetectorConfig:
  backbone_widths: list[int] = field(default_factory=lambda: [16, 32, 64, 128])
  fused_channels: int = 256
  enable_cla: bool = True
  cla_placement: list[str] = field(default_factory=lambda: ["out2"])
  cla_reduction: int = 16
  enable_fdr: bool = True
  k: float = 50.0
  # fdr.* keys
  low_level_stage: str = "conv2"
  low_level_channels: int = 48
  fusion_kernel: int = 3

  def validate(self) -> list[str]:
    bad = []
    if len(self.backbone_widths) != 4 or any(w <= 0 for w in self.backbone_widths):
      bad.append("model.backbone_widths")
    if self.fused_channels <= 0 or self.fused_channels % 4:
      bad.append("model.fused_channels")
    if not self.cla_placement or any(p not in PYRAMID_LEVELS for p in self.cla_placement):
      bad.append("model.cla_placement")
    if self.cla_reduction <= 0:
      bad.append("model.cla_reduction")
    if self.k <= 0:
      bad.append("model.k")
    if self.low_level_stage not in LOW_LEVEL_STAGES:
      bad.append("fdr.low_level_stage")
    if self.low_level_channels <= 0:
      bad.append("fdr.low_level_channels")
    if self.fusion_kernel not in (1, 3):
      bad.append("fdr.fusion_kernel")
    return bad


@dataclass
class LossConfig:
  alpha: float = 5.0
  beta: float = 10.0
  ohem_ratio: float = 3.0
  ohem_fallback: int = 100
  dice_eps: float = 1e-6
  log_eps: float = 1e-6

  def validate(self) -> list[str]:
    return [f"loss.{k}" for k in ("alpha", "beta", "ohem_ratio", "ohem_fallback", "dice_eps", "log_eps")
            if getattr(self, k) <= 0]


@dataclass
class LabelConfig:
  shrink_ratio: float = 0.4
  thresh_min: float = 0.3
  thresh_max: float = 0.7

  def validate(self) -> list[str]:
    bad = []
    if not 0 < self.shrink_ratio < 1:
      bad.append("labels.shrink_ratio")
    if not 0 <= self.thresh_min < self.thresh_max <= 1:
      bad.append("labels.thresh_min/thresh_max")
    return bad


@dataclass
class AugmentConfig:
  flip_prob: float = 0.5
  max_rotation: float = 10.0
  rotation_prob: float = 0.5
  crop_prob: float = 0.5
  crop_min_scale: float = 0.6

  def validate(self) -> list[str]:
    bad = [f"augment.{k}" for k in ("flip_prob", "rotation_prob", "crop_prob")
           if not 0 <= getattr(self, k) <= 1]
    if self.max_rotation < 0:
      bad.append("augment.max_rotation")
    if not 0 < self.crop_min_scale <= 1:
      bad.append("augment.crop_min_scale")
    return bad


@dataclass
class PostprocessConfig:
  thresh: float = 0.3
  unclip_ratio: float = 1.5
  min_score: float = 0.5
  min_area: int = 16
  box_type: str = "poly"

  def validate(self) -> list[str]:
    bad = []
    if self.unclip_ratio <= 0:
      bad.append("postprocess.unclip_ratio")
    if self.min_area < 0:
      bad.append("postprocess.min_area")
    if self.box_type not in ("poly", "quad"):
      bad.append("postprocess.box_type")
    return bad


@dataclass
class InferConfig:
  short_edge: int = 736
  multiple: int = 32

  def validate(self) -> list[str]:
    return [f"infer.{k}" for k in ("short_edge", "multiple") if getattr(self, k) <= 0]


@dataclass
class SynthSceneSpec:
  canvas_width: int = 256
  canvas_height: int = 256
  min_instances: int = 2
  max_instances: int = 5
  min_aspect: float = 2.0
  max_aspect: float = 8.0
  min_height: int = 14
  max_height: int = 32
  spacing: int = 4
  max_rotation: float = 30.0
  curved: bool = False
  adjacency_pairs: bool = True
  extreme_aspect: bool = True

  def validate(self) -> list[str]:
    bad = [f"synth.{k}" for k in ("canvas_width", "canvas_height", "min_aspect", "min_height", "spacing")
           if getattr(self, k) <= 0]
    if not 0 <= self.min_instances <= self.max_instances:
      bad.append("synth.min_instances/max_instances")
    if self.max_aspect < self.min_aspect:
      bad.append("synth.max_aspect")
    if self.max_height < self.min_height:
      bad.append("synth.max_height")
    return bad


# section name -> (RunConfig attribute, dataclass). `fdr` shares DetectorConfig with `model`.
_SECTIONS: dict[str, tuple[str, type]] = {
  "train": ("train", TrainConfig),
  "model": ("model", DetectorConfig),
  "fdr": ("model", DetectorConfig),
  "loss": ("loss", LossConfig),
  "labels": ("labels", LabelConfig),
  "augment": ("augment", AugmentConfig),
  "postprocess": ("postprocess", PostprocessConfig),
  "infer": ("infer", InferConfig),
  "synth": ("synth", SynthSceneSpec),
}
_FDR_FIELDS = ("low_level_stage", "low_level_channels", "fusion_kernel")


def _section_of(attr: str, fname: str) -> str:
  if attr == "model" and fname in _FDR_FIELDS:
    return "fdr"
  return attr


@dataclass
class RunConfig:
  train: TrainConfig = field(default_factory=TrainConfig)
  model: DetectorConfig = field(default_factory=DetectorConfig)
  loss: LossConfig = field(default_factory=LossConfig)
  labels: LabelConfig = field(default_factory=LabelConfig)
  augment: AugmentConfig = field(default_factory=AugmentConfig)
  postprocess: PostprocessConfig = field(default_factory=PostprocessConfig)
  infer: InferConfig = field(default_factory=InferConfig)
  synth: SynthSceneSpec = field(default_factory=SynthSceneSpec)

  def to_flat(self) -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for attr in ("train", "model", "loss", "labels", "augment", "postprocess", "infer", "synth"):
      section = getattr(self, attr)
      for f in dataclasses.fields(section):
        value = getattr(section, f.name)
        flat[f"{_section_of(attr, f.name)}.{f.name}"] = list(value) if isinstance(value, list) else value
    return dict(sorted(flat.items()))

  @staticmethod
  def known_keys() -> set[str]:
    return set(RunConfig().to_flat())

  @staticmethod
  def from_flat(flat: Mapping[str, Any]) -> RunConfig:
    """Build a config from `section.name` keys; missing keys keep their defaults."""
    defaults = RunConfig().to_flat()
    unknown = sorted(set(flat) - set(defaults))
    if unknown:
      raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    mistyped = []
    for key, value in flat.items():
      expected = defaults[key]
      if isinstance(expected, bool) or isinstance(value, bool):
        ok = isinstance(value, bool) and isinstance(expected, bool)
      elif isinstance(expected, float):
        ok = isinstance(value, (int, float))
      else:
        ok = isinstance(value, type(expected))
      if not ok:
        mistyped.append(f"{key} (expected {type(expected).__name__}, got {type(value).__name__})")
    if mistyped:
      raise ConfigError(f"config keys of the wrong type: {', '.join(mistyped)}")

    config = RunConfig()
    for key, value in flat.items():
      section, fname = key.split(".", 1)
      attr = _SECTIONS[section][0]
      if isinstance(defaults[key], float):
        value = float(value)
      setattr(getattr(config, attr), fname, list(value) if isinstance(value, list) else value)
    config.validate()
    return config

  def validate(self) -> None:
    bad: list[str] = []
    for attr in ("train", "model", "loss", "labels", "augment", "postprocess", "infer", "synth"):
      bad.extend(getattr(self, attr).validate())
    if bad:
      raise ConfigError(f"invalid config values: {', '.join(bad)}")

  def replace(self, **flat: Any) -> RunConfig:
    """Copy with some flat keys overridden; keys use `__` in place of `.`."""
    merged = self.to_flat()
    merged.update({k.replace("__", "."): v for k, v in flat.items()})
    return RunConfig.from_flat(merged)


def _flatten(tree: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
  flat: dict[str, Any] = {}
  for key, value in tree.items():
    full = f"{prefix}{key}"
    if isinstance(value, dict):
      flat.update(_flatten(value, f"{full}."))
    else:
      flat[full] = value
  return flat


def parse_config(text: str) -> RunConfig:
  try:
    tree = tomllib.loads(text)
  except tomllib.TOMLDecodeError as e:
    raise ConfigError(f"config is not valid TOML: {e}") from e
  return RunConfig.from_flat(_flatten(tree))


def load_config(path: str | Path) -> RunConfig:
  return parse_config(Path(path).read_text(encoding="utf-8"))


def _toml_value(value: Any) -> str:
  if isinstance(value, bool):
    return "true" if value else "false"
  if isinstance(value, str):
    return f'"{value}"'
  if isinstance(value, list):
    return "[" + ", ".join(_toml_value(v) for v in value) + "]"
  return repr(value)


def dump_config(config: RunConfig) -> str:
  return "".join(f"{key} = {_toml_value(value)}\n" for key, value in config.to_flat().items())
