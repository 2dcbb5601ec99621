"""Image corpora and training batches.

A corpus directory holds `<stem>.png` (or `.jpg`) images next to `<stem>.txt`
annotation files. Batches are assembled by a thread pool; every sample draws
its augmentation from a seed derived from (run seed, iteration, slot), so the
batch does not depend on which worker built which sample.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import cv2
import numpy as np
import torch

from fdrnet.core.config import RunConfig, SynthSceneSpec
from fdrnet.core.errors import CorpusError
from fdrnet.core.logger import data_logger
from fdrnet.labels.annotation import TextAnnotation, read_annotations, write_annotations
from fdrnet.labels.label_maps import LabelMaps, gen_label_maps
from fdrnet.training.augment import augment
from fdrnet.training.synth import gen_synth_sample

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
# ImageNet statistics, RGB order.
PIXEL_MEAN = np.array([0.485, 0.456, 0.406])
PIXEL_STD = np.array([0.229, 0.224, 0.225])


@dataclass
class Sample:
  stem: str
  image: np.ndarray  # H x W x 3, uint8, BGR
  annots: list[TextAnnotation]


def load_image(path: str | Path) -> np.ndarray:
  image = cv2.imread(str(path), cv2.IMREAD_COLOR)
  if image is None:
    raise CorpusError(f"cannot read image {path}")
  return image


def load_sample(image_path: str | Path) -> Sample:
  image_path = Path(image_path)
  annot_path = image_path.with_suffix(".txt")
  if not annot_path.exists():
    raise CorpusError(f"{image_path} has no annotation file {annot_path.name}")
  return Sample(stem=image_path.stem, image=load_image(image_path), annots=read_annotations(annot_path))


def load_corpus(data_dir: str | Path) -> list[Sample]:
  data_dir = Path(data_dir)
  if not data_dir.is_dir():
    raise CorpusError(f"corpus directory {data_dir} does not exist")
  paths = sorted(p for p in data_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
  if not paths:
    raise CorpusError(f"no images found in {data_dir}")
  corpus = [load_sample(p) for p in paths]
  data_logger.bind(component="corpus").info(
    f"Loaded {len(corpus)} images with {sum(len(s.annots) for s in corpus)} instances from {data_dir}")
  return corpus


def write_sample(out_dir: str | Path, sample: Sample) -> Path:
  out_dir = Path(out_dir)
  out_dir.mkdir(parents=True, exist_ok=True)
  image_path = out_dir / f"{sample.stem}.png"
  if not cv2.imwrite(str(image_path), sample.image):
    raise CorpusError(f"cannot write image {image_path}")
  write_annotations(out_dir / f"{sample.stem}.txt", sample.annots)
  return image_path


def gen_corpus(spec: SynthSceneSpec, out_dir: str | Path, count: int, seed: int) -> list[Path]:
  """Render `count` synthetic scenes; scene i uses the seed sequence (seed, i)."""
  paths = []
  for i in range(count):
    image, annots = gen_synth_sample(spec, np.random.SeedSequence([seed, i]))
    paths.append(write_sample(out_dir, Sample(stem=f"synth_{i:05d}", image=image, annots=annots)))
  data_logger.bind(component="synth").info(f"Wrote {count} synthetic scenes to {out_dir}")
  return paths


def normalize(image: np.ndarray, dtype: torch.dtype = torch.float32) -> torch.Tensor:
  """BGR uint8 H x W x 3 -> normalized RGB 3 x H x W tensor."""
  rgb = image[..., ::-1].astype(np.float64) / 255.0
  chw = ((rgb - PIXEL_MEAN) / PIXEL_STD).transpose(2, 0, 1)
  return torch.from_numpy(np.ascontiguousarray(chw)).to(dtype)


@dataclass
class Batch:
  stems: list[str]
  images: torch.Tensor  # N x 3 x S x S
  prob_gt: torch.Tensor  # N x S x S
  prob_mask: torch.Tensor
  thresh_gt: torch.Tensor
  thresh_mask: torch.Tensor

  def to(self, dtype: torch.dtype) -> Batch:
    return Batch(self.stems, *(t.to(dtype) for t in (self.images, self.prob_gt, self.prob_mask,
                                                      self.thresh_gt, self.thresh_mask)))

  def as_arrays(self) -> dict[str, np.ndarray]:
    return {"stems": np.array(self.stems), "images": self.images.numpy(), "prob_gt": self.prob_gt.numpy(),
            "prob_mask": self.prob_mask.numpy(), "thresh_gt": self.thresh_gt.numpy(),
            "thresh_mask": self.thresh_mask.numpy()}


def build_sample(sample: Sample, seed: np.random.SeedSequence, config: RunConfig) -> tuple[torch.Tensor, LabelMaps]:
  size = config.train.image_size
  image, annots = augment(sample.image, sample.annots, seed, size, config.augment)
  labels = gen_label_maps(annots, size, size, config.labels.shrink_ratio,
                          config.labels.thresh_min, config.labels.thresh_max)
  return normalize(image), labels


class BatchLoader:
  """Draws batches from an in-memory corpus, one pass over a shuffled order per epoch."""

  def __init__(self, corpus: Sequence[Sample], config: RunConfig, max_workers: Optional[int] = None) -> None:
    if not corpus:
      raise CorpusError("cannot train on an empty corpus")
    self._corpus = list(corpus)
    self._config = config
    self._max_workers = max_workers or config.train.num_workers
    self._orders: dict[int, np.ndarray] = {}

  def _order(self, epoch: int) -> np.ndarray:
    if epoch not in self._orders:
      rng = np.random.default_rng(np.random.SeedSequence([self._config.train.seed, epoch]))
      self._orders = {epoch: rng.permutation(len(self._corpus))}
    return self._orders[epoch]

  def indices(self, iteration: int) -> list[int]:
    n, bs = len(self._corpus), self._config.train.batch_size
    picked = []
    for slot in range(bs):
      pos = iteration * bs + slot
      picked.append(int(self._order(pos // n)[pos % n]))
    return picked

  def batch(self, iteration: int) -> Batch:
    picked = self.indices(iteration)
    seeds = [np.random.SeedSequence([self._config.train.seed, iteration, slot]) for slot in range(len(picked))]
    with ThreadPoolExecutor(max_workers=self._max_workers) as executor:
      built = list(executor.map(lambda a: build_sample(self._corpus[a[0]], a[1], self._config), zip(picked, seeds)))
    labels = [torch.from_numpy(lm.stack()) for _, lm in built]
    stacked = torch.stack(labels)
    return Batch(
      stems=[self._corpus[i].stem for i in picked],
      images=torch.stack([img for img, _ in built]),
      prob_gt=stacked[:, 0], prob_mask=stacked[:, 1], thresh_gt=stacked[:, 2], thresh_mask=stacked[:, 3],
    )
