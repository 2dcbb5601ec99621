import math
import unittest

import torch
from torch import nn

from fdrnet.core.gradcheck import finite_diff_check


class _ScaledGradSquare(torch.autograd.Function):
  """x ** 2 whose backward is off by a constant factor."""

  factor = 1.1

  @staticmethod
  def forward(ctx, x: torch.Tensor) -> torch.Tensor:
    ctx.save_for_backward(x)
    return x * x

  @staticmethod
  def backward(ctx, grad: torch.Tensor) -> torch.Tensor:
    (x,) = ctx.saved_tensors
    return grad * 2 * x * _ScaledGradSquare.factor


class _NanGrad(torch.autograd.Function):
  @staticmethod
  def forward(ctx, x: torch.Tensor) -> torch.Tensor:
    return x.clone()

  @staticmethod
  def backward(ctx, grad: torch.Tensor) -> torch.Tensor:
    return grad * math.nan


class TestFiniteDiffCheck(unittest.TestCase):
  def setUp(self) -> None:
    gen = torch.Generator().manual_seed(0)
    self.x = torch.randn(3, 5, 7, generator=gen, dtype=torch.float64)

  def test_identity_has_zero_error(self) -> None:
    report = finite_diff_check(lambda x: x, {"x": self.x}, name="identity")
    self.assertTrue(report.passed)
    self.assertLess(report.max_rel_error, 1e-9)
    self.assertEqual(report.op_name, "identity")

  def test_smooth_op_passes(self) -> None:
    report = finite_diff_check(lambda x: torch.tanh(x) * x, {"x": self.x})
    self.assertTrue(report.passed, str(report))

  def test_corrupted_gradient_fails(self) -> None:
    report = finite_diff_check(_ScaledGradSquare.apply, {"x": self.x}, name="corrupted")
    self.assertFalse(report.passed)
    # A 10 % scale error shows up as roughly 0.1 / 1.1 relative error.
    self.assertGreater(report.max_rel_error, 0.05)

  def test_non_finite_gradient_fails_with_diagnostic(self) -> None:
    report = finite_diff_check(_NanGrad.apply, {"x": self.x}, name="nan")
    self.assertFalse(report.passed)
    self.assertEqual(report.max_rel_error, math.inf)
    self.assertIn("non-finite", report.diagnostic)

  def test_module_parameters_are_checked(self) -> None:
    torch.manual_seed(0)
    layer = nn.Linear(4, 3)
    x = torch.randn(2, 4, dtype=torch.float64)
    report = finite_diff_check(layer, {"input": x}, module=layer)
    self.assertTrue(report.passed, str(report))
    self.assertIn("param:weight", report.errors)
    self.assertIn("param:bias", report.errors)
    self.assertEqual(layer.weight.dtype, torch.float64)

  def test_max_entries_limits_the_work(self) -> None:
    calls = []

    def op(x: torch.Tensor) -> torch.Tensor:
      calls.append(1)
      return x.sin()

    report = finite_diff_check(op, {"x": self.x}, max_entries=10)
    self.assertTrue(report.passed)
    # One analytic pass plus two evaluations per checked entry.
    self.assertEqual(len(calls), 1 + 2 * 10)

  def test_report_string_names_every_tensor(self) -> None:
    report = finite_diff_check(lambda a, b: a * b, {"a": self.x, "b": self.x + 1}, name="product")
    text = str(report)
    self.assertIn("PASS", text)
    self.assertIn("a", report.errors)
    self.assertIn("b", report.errors)


if __name__ == "__main__":
  unittest.main()
