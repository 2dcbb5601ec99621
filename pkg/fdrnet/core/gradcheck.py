"""Central finite-difference verification of analytic gradients."""
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import torch
from torch import nn

from fdrnet.core.logger import train_logger

DEFAULT_STEP = 1e-3
DENOMINATOR_FLOOR = 1e-8

OpOutput = Union[torch.Tensor, Sequence[torch.Tensor]]


@dataclass
class GradCheckReport:
  op_name: str
  max_rel_error: float
  tolerance: float
  errors: dict[str, float] = field(default_factory=dict)
  diagnostic: Optional[str] = None

  @property
  def passed(self) -> bool:
    return self.max_rel_error <= self.tolerance

  def __str__(self) -> str:
    rows = "\n".join(f"  {name:<32} {err:.3e}" for name, err in self.errors.items())
    verdict = "PASS" if self.passed else "FAIL"
    extra = f"\n  {self.diagnostic}" if self.diagnostic else ""
    return f"{self.op_name}: {verdict} max rel error {self.max_rel_error:.3e} (tol {self.tolerance:.1e})\n{rows}{extra}"


def _flatten(out: OpOutput) -> torch.Tensor:
  if isinstance(out, torch.Tensor):
    return out.reshape(-1)
  return torch.cat([o.reshape(-1) for o in out])


def _pick_entries(numel: int, max_entries: Optional[int], gen: torch.Generator) -> list[int]:
  if max_entries is None or numel <= max_entries:
    return list(range(numel))
  return sorted(torch.randperm(numel, generator=gen)[:max_entries].tolist())


def finite_diff_check(op: Callable[..., OpOutput],
                      inputs: Mapping[str, torch.Tensor],
                      tol: float = 1e-4,
                      step: float = DEFAULT_STEP,
                      module: Optional[nn.Module] = None,
                      max_entries: Optional[int] = None,
                      seed: int = 0,
                      name: Optional[str] = None) -> GradCheckReport:
  """Compare autograd gradients of `op` with central differences.

  The output is projected onto a fixed random cotangent so one scalar covers
  every output element. Gradients are checked with respect to every tensor in
  `inputs` and, when `module` is given, every parameter of it. `max_entries`
  caps the number of checked entries per tensor (chosen at random, seeded).
  Everything runs in double precision; `module` is converted in place.
  """
  op_name = name or getattr(op, "__name__", type(op).__name__)
  gen = torch.Generator().manual_seed(seed)

  if module is not None:
    module.double()
  tensors: dict[str, torch.Tensor] = {
    k: v.detach().to(torch.float64).clone().requires_grad_(True) for k, v in inputs.items()}
  checked: dict[str, torch.Tensor] = dict(tensors)
  if module is not None:
    for pname, p in module.named_parameters():
      checked[f"param:{pname}"] = p

  out = _flatten(op(**tensors))
  cotangent = torch.randn(out.shape, generator=gen, dtype=torch.float64)

  def scalar() -> float:
    with torch.no_grad():
      return float((_flatten(op(**tensors)) * cotangent).sum())

  analytic = torch.autograd.grad((out * cotangent).sum(), list(checked.values()), allow_unused=True)

  report = GradCheckReport(op_name=op_name, max_rel_error=0.0, tolerance=tol)
  for (tname, t), a in zip(checked.items(), analytic):
    a = torch.zeros_like(t) if a is None else a.detach()
    if not torch.isfinite(a).all():
      report.errors[tname] = math.inf
      report.max_rel_error = math.inf
      report.diagnostic = f"non-finite analytic gradient for {tname}"
      continue

    worst = 0.0
    flat_t = t.data.view(-1)
    flat_a = a.reshape(-1)
    for i in _pick_entries(flat_t.numel(), max_entries, gen):
      orig = flat_t[i].item()
      flat_t[i] = orig + step
      plus = scalar()
      flat_t[i] = orig - step
      minus = scalar()
      flat_t[i] = orig
      numeric = (plus - minus) / (2 * step)
      ana = flat_a[i].item()
      rel = abs(ana - numeric) / max(abs(ana), abs(numeric), DENOMINATOR_FLOOR)
      worst = max(worst, rel)
    report.errors[tname] = worst
    report.max_rel_error = max(report.max_rel_error, worst)

  _logger = train_logger.bind(component="gradcheck")
  if report.passed:
    _logger.debug(str(report))
  else:
    _logger.warning(str(report))
  return report
