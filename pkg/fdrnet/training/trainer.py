"""Momentum-SGD training of the detector on a corpus.

A run directory receives `config.toml`, `run.log`, `train_log.jsonl` (one
record per step), `ckpt_<iter>.ckpt` every `train.checkpoint_interval` steps
and `final.ckpt`.
"""
from __future__ import annotations

from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from fdrnet.core.config import RunConfig, dump_config
from fdrnet.core.errors import TrainingDivergedError
from fdrnet.core.logger import remove_run_logfile, set_run_logfile, train_logger
from fdrnet.core.message import JsonRecord
from fdrnet.detector.checkpoint import save_checkpoint
from fdrnet.detector.detector import FdrNet
from fdrnet.losses.losses import DetectionLoss, LossBreakdown
from fdrnet.training.dataset import Batch, BatchLoader, Sample
from fdrnet.training.schedule import build_optimizer, poly_lr, set_lr

DTYPES = {"float32": torch.float32, "float64": torch.float64}

StepCallback = Callable[[int, LossBreakdown], None]


class Trainer:
  def __init__(self, config: RunConfig, corpus: Sequence[Sample], out_dir: str | Path,
               model: Optional[FdrNet] = None, max_workers: Optional[int] = None) -> None:
    config.validate()
    self.config = config
    self.out_dir = Path(out_dir)
    self.dtype = DTYPES[config.train.precision]
    self._logger = train_logger.bind(component="trainer")

    torch.manual_seed(config.train.seed)
    torch.use_deterministic_algorithms(True, warn_only=True)
    self.model = (model or FdrNet(config.model)).to(self.dtype)
    self.optimizer = build_optimizer(self.model.parameters(), config.train)
    self.criterion = DetectionLoss(config.loss)
    self.loader = BatchLoader(corpus, config, max_workers)
    self.history: list[dict[str, float]] = []

  def lr_at(self, iteration: int) -> float:
    t = self.config.train
    return poly_lr(iteration, t.max_iter, t.lr0, t.power)

  def _dump_batch(self, iteration: int, batch: Batch) -> Path:
    path = self.out_dir / f"nonfinite_batch_{iteration}.npz"
    np.savez(path, **batch.as_arrays())
    return path

  def step(self, iteration: int, batch: Batch) -> LossBreakdown:
    self.model.train()
    lr = self.lr_at(iteration)
    set_lr(self.optimizer, lr)
    batch = batch.to(self.dtype)

    self.optimizer.zero_grad(set_to_none=True)
    out = self.model(batch.images)
    losses = self.criterion(out, batch.prob_gt, batch.prob_mask, batch.thresh_gt, batch.thresh_mask)
    if not torch.isfinite(losses.total):
      dump = self._dump_batch(iteration, batch)
      raise TrainingDivergedError(f"non-finite loss {float(losses.total)} at iteration {iteration} "
                                  f"(images {batch.stems}); batch written to {dump}")
    losses.total.backward()
    self.optimizer.step()
    return losses

  def run(self, on_step: Optional[StepCallback] = None) -> Path:
    """Train for `train.max_iter` steps and return the path of `final.ckpt`."""
    t = self.config.train
    self.out_dir.mkdir(parents=True, exist_ok=True)
    (self.out_dir / "config.toml").write_text(dump_config(self.config), encoding="utf-8")
    sink_id = set_run_logfile(str(self.out_dir / "run.log"))
    try:
      self._logger.info(f"Training for {t.max_iter} iterations, batch {t.batch_size}, "
                        f"{sum(p.numel() for p in self.model.parameters())} parameters, {t.precision}")
      with open(self.out_dir / "train_log.jsonl", "w", encoding="utf-8") as log_file:
        for iteration in range(t.max_iter):
          losses = self.step(iteration, self.loader.batch(iteration))
          row = {"iteration": iteration, "lr": self.lr_at(iteration), **losses.as_floats()}
          self.history.append(row)
          log_file.write(JsonRecord(row).to_line())
          if iteration % t.log_interval == 0 or iteration == t.max_iter - 1:
            self._logger.info(f"iter {iteration:>6} lr {row['lr']:.6f} loss {row['loss']:.4f} "
                              f"(prob {row['loss_prob']:.4f} binary {row['loss_binary']:.4f} "
                              f"thresh {row['loss_thresh']:.4f})")
          if on_step is not None:
            on_step(iteration, losses)
          if (iteration + 1) % t.checkpoint_interval == 0 and iteration + 1 < t.max_iter:
            save_checkpoint(self.out_dir / f"ckpt_{iteration + 1:06d}.ckpt", self.model, self.config,
                            {"iteration": iteration + 1})

      final = save_checkpoint(self.out_dir / "final.ckpt", self.model, self.config,
                              {"iteration": t.max_iter, "final_loss": self.history[-1]["loss"]})
      self._logger.info(f"Wrote {final}")
      return final
    except TrainingDivergedError as e:
      self._logger.error(str(e))
      raise
    finally:
      remove_run_logfile(sink_id)


def train(config: RunConfig, corpus: Sequence[Sample], out_dir: str | Path) -> Path:
  return Trainer(config, corpus, out_dir).run()
