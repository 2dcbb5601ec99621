from typing import Iterable

import torch

from fdrnet.core.config import TrainConfig
from fdrnet.core.errors import ScheduleError


def poly_lr(iteration: int, max_iter: int, lr0: float = 0.007, power: float = 0.9) -> float:
  """lr0 * (1 - iteration / max_iter) ** power."""
  if not 0 <= iteration <= max_iter:
    raise ScheduleError(f"iteration {iteration} outside [0, {max_iter}]")
  return lr0 * (1 - iteration / max_iter) ** power


def build_optimizer(params: Iterable[torch.nn.Parameter], config: TrainConfig) -> torch.optim.SGD:
  """SGD with Nesterov momentum; weight decay is added to the gradient (classical L2)."""
  return torch.optim.SGD(params, lr=config.lr0, momentum=config.momentum,
                         weight_decay=config.weight_decay, nesterov=config.nesterov)


def set_lr(optimizer: torch.optim.Optimizer, lr: float) -> None:
  for group in optimizer.param_groups:
    group["lr"] = lr
