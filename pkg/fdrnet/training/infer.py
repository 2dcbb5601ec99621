import math
from typing import Optional

import cv2
import numpy as np
import torch
from torch import nn

from fdrnet.core.config import PostprocessConfig
from fdrnet.core.logger import eval_logger
from fdrnet.detector.checkpoint import Checkpoint
from fdrnet.evaluation.postprocess import Detection, detect
from fdrnet.training.augment import mean_pixel
from fdrnet.training.dataset import normalize


def _scaled_size(height: int, width: int, scale: float) -> tuple[int, int]:
  return max(1, round(height * scale)), max(1, round(width * scale))


def resize_short_edge(image: np.ndarray, short_edge: int = 736, multiple: int = 32) -> tuple[np.ndarray, float]:
  """Scale so the short edge equals `short_edge`, then pad right/bottom to a multiple of `multiple`.

  Padding uses the mean pixel; the scaled content sits at the top-left corner.
  """
  h, w = image.shape[:2]
  scale = short_edge / min(h, w)
  nh, nw = _scaled_size(h, w, scale)
  resized = cv2.resize(image, (nw, nh), interpolation=cv2.INTER_LINEAR) if (nh, nw) != (h, w) else image
  ph, pw = math.ceil(nh / multiple) * multiple, math.ceil(nw / multiple) * multiple
  padded = np.empty((ph, pw, image.shape[2]), dtype=image.dtype)
  padded[:] = mean_pixel(image)
  padded[:nh, :nw] = resized
  return padded, scale


def infer_with_model(model: nn.Module, image: np.ndarray, short_edge: int = 736, multiple: int = 32,
                     postprocess: PostprocessConfig = PostprocessConfig()) -> list[Detection]:
  h, w = image.shape[:2]
  padded, scale = resize_short_edge(image, short_edge, multiple)
  nh, nw = _scaled_size(h, w, scale)
  dtype = next(model.parameters(), torch.empty(0)).dtype
  model.eval()
  with torch.no_grad():
    out = model(normalize(padded, dtype).unsqueeze(0))
  prob = out.prob[0, 0, :nh, :nw].double().numpy()
  dets = detect(prob, postprocess)
  back = np.array([w / nw, h / nh])
  mapped = [Detection(polygon=d.polygon * back, score=d.score) for d in dets]
  eval_logger.bind(component="infer").debug(f"{w}x{h} image at scale {scale:.3f}: {len(mapped)} detections")
  return mapped


def infer(checkpoint: Checkpoint, image: np.ndarray, short_edge: Optional[int] = None,
          model: Optional[nn.Module] = None) -> list[Detection]:
  """Detect text in a BGR image; polygons come back in the image's own coordinates."""
  config = checkpoint.config
  if model is None:
    model = checkpoint.build_detector()
  return infer_with_model(model, image, short_edge or config.infer.short_edge, config.infer.multiple,
                          config.postprocess)
