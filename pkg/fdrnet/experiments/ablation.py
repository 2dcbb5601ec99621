"""Train a family of detector variants on one corpus and compare them.

Every variant is the base config with a few keys overridden; all share the
seed and the corpus. Each study writes into its output directory:
  <variant>/            the variant's run directory (checkpoints, logs)
  comparison.csv        one row per variant at IoU 0.5
  pr_curves.csv         precision / recall per variant and IoU threshold
  pr_curves.png         the same curves, one line per variant
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from matplotlib.figure import Figure

from fdrnet.core.config import PYRAMID_LEVELS, RunConfig
from fdrnet.core.logger import eval_logger
from fdrnet.detector.checkpoint import load_checkpoint
from fdrnet.evaluation.metrics import (IOU_THRESH, PR_CSV_HEADER, EvalReport, PrPoint, default_iou_grid,
                                       evaluate_corpus, pr_curve, pr_curve_area)
from fdrnet.training.dataset import Sample
from fdrnet.training.infer import infer
from fdrnet.training.trainer import Trainer


@dataclass
class Variant:
  name: str
  # Flat config keys with `__` in place of `.`, as accepted by RunConfig.replace.
  overrides: dict[str, Any] = field(default_factory=dict)


@dataclass
class VariantResult:
  name: str
  summary: EvalReport
  curve: list[PrPoint]
  final_loss: float

  @property
  def pr_area(self) -> float:
    return pr_curve_area(self.curve)


class AblationStudy:
  """Base harness. Subclasses only declare their variants."""

  title = "ablation"

  def __init__(self, base: RunConfig, corpus: Sequence[Sample], out_dir: str | Path,
               iou_grid: Optional[Sequence[float]] = None) -> None:
    self._logger = eval_logger.bind(component="ablation")
    self._base = base
    self._corpus = list(corpus)
    self._out_dir = Path(out_dir)
    self._iou_grid = list(iou_grid) if iou_grid is not None else default_iou_grid()
    self._configs = {v.name: base.replace(**v.overrides) for v in self.variants()}
    self._logger.debug(f"Initialized {self.title} study with variants {list(self._configs)}")

  def variants(self) -> list[Variant]:
    return [Variant("base")]

  def create_trainer(self, name: str, config: RunConfig) -> Trainer:
    return Trainer(config, self._corpus, self._out_dir / name)

  def run_variant(self, name: str) -> VariantResult:
    self._logger.info(f"Training variant {name}")
    trainer = self.create_trainer(name, self._configs[name])
    checkpoint = load_checkpoint(trainer.run())
    model = checkpoint.build_detector()
    pairs = [(infer(checkpoint, s.image, model=model), s.annots) for s in self._corpus]
    _, summary = evaluate_corpus(pairs, IOU_THRESH)
    return VariantResult(name=name, summary=summary, curve=pr_curve(pairs, self._iou_grid),
                         final_loss=trainer.history[-1]["loss"])

  def run_all(self) -> list[VariantResult]:
    self._out_dir.mkdir(parents=True, exist_ok=True)
    results = [self.run_variant(name) for name in self._configs]
    self.write_outputs(results)
    return results

  def write_outputs(self, results: Sequence[VariantResult]) -> None:
    with open(self._out_dir / "comparison.csv", "w", newline="", encoding="utf-8") as f:
      writer = csv.writer(f)
      writer.writerow(["variant", "precision", "recall", "f_score", "pr_area", "final_loss"])
      for r in results:
        writer.writerow([r.name, f"{r.summary.precision:.4f}", f"{r.summary.recall:.4f}",
                         f"{r.summary.f_score:.4f}", f"{r.pr_area:.4f}", f"{r.final_loss:.6f}"])

    with open(self._out_dir / "pr_curves.csv", "w", newline="", encoding="utf-8") as f:
      writer = csv.writer(f)
      writer.writerow(["variant", *PR_CSV_HEADER])
      for r in results:
        for p in r.curve:
          writer.writerow([r.name, *p.csv_row()])

    fig = Figure(figsize=(5, 4))
    ax = fig.subplots()
    for r in results:
      ax.plot([p.recall for p in r.curve], [p.precision for p in r.curve], marker="o", label=r.name)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.set_title(self.title)
    ax.legend(loc="lower left")
    fig.savefig(self._out_dir / "pr_curves.png", dpi=100)
    self._logger.info(f"Wrote comparison for {len(results)} variants to {self._out_dir}")


def format_table(results: Sequence[VariantResult]) -> str:
  header = f"{'variant':<14} {'P':>7} {'R':>7} {'F':>7} {'PR-area':>8}"
  rows = [f"{r.name:<14} {100 * r.summary.precision:>7.2f} {100 * r.summary.recall:>7.2f} "
          f"{100 * r.summary.f_score:>7.2f} {r.pr_area:>8.4f}" for r in results]
  return "\n".join([header, "-" * len(header), *rows])


class ModuleAblation(AblationStudy):
  title = "modules"

  def variants(self) -> list[Variant]:
    return [
      Variant("baseline", {"model__enable_fdr": False, "model__enable_cla": False}),
      Variant("+FDR", {"model__enable_fdr": True, "model__enable_cla": False}),
      Variant("+CLA", {"model__enable_fdr": False, "model__enable_cla": True}),
      Variant("+FDR+CLA", {"model__enable_fdr": True, "model__enable_cla": True}),
    ]


class ClaPlacementAblation(AblationStudy):
  title = "cla placement"

  def variants(self) -> list[Variant]:
    return [
      Variant("CLA-1", {"model__enable_cla": True, "model__cla_placement": ["out2"]}),
      Variant("CLA-2", {"model__enable_cla": True, "model__cla_placement": ["out2", "out3"]}),
      Variant("CLA-4", {"model__enable_cla": True, "model__cla_placement": list(PYRAMID_LEVELS)}),
    ]


class LowLevelStageAblation(AblationStudy):
  title = "low-level stage"

  def variants(self) -> list[Variant]:
    return [
      Variant("FDR-conv2", {"model__enable_fdr": True, "fdr__low_level_stage": "conv2"}),
      Variant("FDR-conv3", {"model__enable_fdr": True, "fdr__low_level_stage": "conv3"}),
    ]


STUDIES: dict[str, type[AblationStudy]] = {
  "modules": ModuleAblation,
  "cla": ClaPlacementAblation,
  "lowlevel": LowLevelStageAblation,
}
