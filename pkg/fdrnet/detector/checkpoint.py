"""Checkpoint container.

---------------------------------------------------------------------------
| magic (8 bytes) | header record (framed JSON) | tensor blob (raw bytes) |
---------------------------------------------------------------------------
The header carries the format version, the flat config snapshot, free-form
metadata and, per tensor, its name, dtype, shape and byte range in the blob.
Tensors are stored little-endian and C-contiguous, so saving a loaded
checkpoint reproduces the file byte for byte.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Final, Optional

import numpy as np
import torch
from torch import nn

from fdrnet.core.config import RunConfig
from fdrnet.core.errors import CheckpointError, ConfigError
from fdrnet.core.framing import RECORD_VALID, STATUS_CODE, read_exact, read_record, write_record
from fdrnet.core.logger import train_logger
from fdrnet.core.message import JsonRecord
from fdrnet.detector.detector import FdrNet

MAGIC: Final[bytes] = b"FDRNETCK"
FORMAT_VERSION: Final[int] = 1


@dataclass
class Checkpoint:
  config: RunConfig
  state: dict[str, torch.Tensor]
  meta: dict[str, Any] = field(default_factory=dict)

  def build_detector(self, dtype: Optional[torch.dtype] = None) -> FdrNet:
    model = FdrNet(self.config.model)
    try:
      model.load_state_dict(self.state, strict=True)
    except RuntimeError as e:
      raise CheckpointError(f"checkpoint parameters do not fit the configured detector: {e}") from e
    if dtype is not None:
      model.to(dtype)
    return model.eval()


def _le(dtype: np.dtype) -> np.dtype:
  return dtype.newbyteorder("<")


def save_checkpoint(path: str | Path, model: nn.Module, config: RunConfig,
                    meta: Optional[dict[str, Any]] = None) -> Path:
  return write_checkpoint(path, Checkpoint(config=config, state=dict(model.state_dict()), meta=meta or {}))


def write_checkpoint(path: str | Path, checkpoint: Checkpoint) -> Path:
  path = Path(path)
  index = []
  blobs = []
  offset = 0
  for name, tensor in checkpoint.state.items():
    arr = tensor.detach().cpu().contiguous().numpy()
    raw = arr.astype(_le(arr.dtype), copy=False).tobytes()
    index.append({"name": name, "dtype": arr.dtype.name, "shape": list(arr.shape),
                  "offset": offset, "nbytes": len(raw)})
    blobs.append(raw)
    offset += len(raw)

  header = JsonRecord({
    "format_version": FORMAT_VERSION,
    "config": checkpoint.config.to_flat(),
    "meta": checkpoint.meta,
    "tensors": index,
  })
  path.parent.mkdir(parents=True, exist_ok=True)
  with open(path, "wb") as f:
    f.write(MAGIC)
    write_record(f, header)
    for raw in blobs:
      f.write(raw)
  train_logger.bind(component="checkpoint").debug(f"Wrote {len(index)} tensors ({offset} bytes) to {path}")
  return path


def load_checkpoint(path: str | Path) -> Checkpoint:
  path = Path(path)
  try:
    f = open(path, "rb")
  except OSError as e:
    raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e

  with f:
    if read_exact(f, len(MAGIC)) != MAGIC:
      raise CheckpointError(f"{path} is not an fdrnet checkpoint")
    status, header = read_record(f)
    if header is None:
      raise CheckpointError(f"{path}: {STATUS_CODE[status]}")
    assert status == RECORD_VALID
    if header.get("format_version") != FORMAT_VERSION:
      raise CheckpointError(f"{path}: unsupported format version {header.get('format_version')}")
    blob = f.read()

  snapshot: dict[str, Any] = header["config"]
  known = RunConfig.known_keys()
  unknown = sorted(set(snapshot) - known)
  missing = sorted(known - set(snapshot))
  if unknown or missing:
    raise CheckpointError(f"{path}: config snapshot does not match this version; "
                          f"unknown keys: {unknown or 'none'}; missing keys: {missing or 'none'}")
  try:
    config = RunConfig.from_flat(snapshot)
  except ConfigError as e:
    raise CheckpointError(f"{path}: invalid config snapshot: {e}") from e

  state: dict[str, torch.Tensor] = {}
  for entry in header["tensors"]:
    start, nbytes = entry["offset"], entry["nbytes"]
    if start + nbytes > len(blob):
      raise CheckpointError(f"{path}: tensor {entry['name']} is truncated")
    dtype = _le(np.dtype(entry["dtype"]))
    arr = np.frombuffer(blob, dtype=dtype, count=nbytes // dtype.itemsize, offset=start)
    arr = arr.astype(dtype.newbyteorder("="), copy=True).reshape(entry["shape"])
    state[entry["name"]] = torch.from_numpy(arr)
  return Checkpoint(config=config, state=state, meta=header["meta"])
