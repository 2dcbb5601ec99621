"""Command-line entry point: `fdrnet <command> ...`."""
from __future__ import annotations

import functools
from pathlib import Path
from typing import Callable, Optional

import click
import cv2
import numpy as np

from fdrnet.core.config import RunConfig, load_config
from fdrnet.core.errors import CorpusError, FdrnetError
from fdrnet.core.message import JsonRecord
from fdrnet.detector.checkpoint import Checkpoint, load_checkpoint
from fdrnet.detector.detector import FdrNet
from fdrnet.evaluation.metrics import (IOU_THRESH, default_iou_grid, evaluate_corpus, pr_curve, pr_curve_area,
                                       write_pr_curve)
from fdrnet.evaluation.postprocess import Detection, detect
from fdrnet.evaluation.visualize import render_detections
from fdrnet.experiments.ablation import STUDIES, format_table
from fdrnet.gradcam.gradcam import CamLayer, GradCam, HeatMap, comparison_panel, render_heatmap, write_raw
from fdrnet.labels.annotation import read_annotations
from fdrnet.training.dataset import IMAGE_SUFFIXES, gen_corpus, load_corpus, load_image, normalize
from fdrnet.training.infer import infer as run_infer
from fdrnet.training.infer import resize_short_edge
from fdrnet.training.trainer import train as run_training


def _fdrnet_errors(fn: Callable) -> Callable:
  @functools.wraps(fn)
  def wrapper(*args, **kwargs):
    try:
      return fn(*args, **kwargs)
    except FdrnetError as e:
      raise click.ClickException(str(e)) from e
  return wrapper


def _config(path: Optional[str]) -> RunConfig:
  return load_config(path) if path else RunConfig()


def _parse_box(text: Optional[str]) -> Optional[tuple[int, int, int, int]]:
  if text is None:
    return None
  try:
    x0, y0, x1, y1 = (int(v) for v in text.split(","))
  except ValueError as e:
    raise click.BadParameter(f"expected x0,y0,x1,y1, got {text!r}") from e
  if x1 <= x0 or y1 <= y0:
    raise click.BadParameter(f"empty box {text!r}")
  return x0, y0, x1, y1


@click.group()
@click.version_option(package_name="fdrnet")
def main() -> None:
  """Scene text detection with cross-level attention and feature decomposition-reconstruction."""


@main.command("gen-data")
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False),
              help="TOML file with synth.* keys (other sections are allowed and ignored).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--count", default=20, show_default=True, type=click.IntRange(min=1))
@click.option("--seed", default=0, show_default=True, type=int)
@_fdrnet_errors
def gen_data(spec_path: Optional[str], out_dir: str, count: int, seed: int) -> None:
  """Render a synthetic corpus of <stem>.png + <stem>.txt pairs."""
  paths = gen_corpus(_config(spec_path).synth, out_dir, count, seed)
  click.echo(f"wrote {len(paths)} images to {out_dir}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_fdrnet_errors
def train(config_path: Optional[str], data_dir: str, out_dir: str) -> None:
  """Train a detector; the run directory receives checkpoints and logs."""
  final = run_training(_config(config_path), load_corpus(data_dir), out_dir)
  click.echo(str(final))


def _images(path: Path) -> list[Path]:
  if path.is_dir():
    images = sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not images:
      raise CorpusError(f"no images found in {path}")
    return images
  return [path]


def _predict(checkpoint: Checkpoint, model: FdrNet, image_path: Path, short_edge: Optional[int]) -> tuple[np.ndarray, list[Detection]]:
  image = load_image(image_path)
  return image, run_infer(checkpoint, image, short_edge, model=model)


@main.command()
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--image", "image_path", required=True, type=click.Path(exists=True),
              help="An image, or a directory of images.")
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Prediction JSON, or a directory of <stem>.json when --image is a directory.")
@click.option("--short-edge", type=click.IntRange(min=32), help="Overrides infer.short_edge (e.g. 736, 800, 1152).")
@click.option("--vis", "vis_path", type=click.Path(), help="Also render detections (file, or directory).")
@_fdrnet_errors
def infer(ckpt_path: str, image_path: str, out_path: str, short_edge: Optional[int], vis_path: Optional[str]) -> None:
  """Detect text and write polygons in original image coordinates."""
  checkpoint = load_checkpoint(ckpt_path)
  model = checkpoint.build_detector()
  source = Path(image_path)
  many = source.is_dir()
  for path in _images(source):
    image, dets = _predict(checkpoint, model, path, short_edge)
    record = JsonRecord({"image": path.name, "detections": [d.to_dict() for d in dets]})
    target = Path(out_path) / f"{path.stem}.json" if many else Path(out_path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(record.to_line(), encoding="utf-8")
    if vis_path:
      vis = Path(vis_path) / f"{path.stem}.png" if many else Path(vis_path)
      vis.parent.mkdir(parents=True, exist_ok=True)
      cv2.imwrite(str(vis), render_detections(image, dets))
    click.echo(f"{path.name}: {len(dets)} detections -> {target}")


def _read_predictions(path: Path) -> list[Detection]:
  record = JsonRecord.from_line(path.read_text(encoding="utf-8"))
  return [Detection.from_dict(d) for d in record["detections"]]


@main.command("eval")
@click.option("--pred-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--gt-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--iou", default=IOU_THRESH, show_default=True, type=click.FloatRange(0, 1, min_open=True))
@click.option("--pr-curve", "curve_path", type=click.Path(dir_okay=False),
              help="Sweep IoU 0.50..0.95 and write iou,precision,recall,f_score rows to this CSV.")
@_fdrnet_errors
def evaluate(pred_dir: str, gt_dir: str, iou: float, curve_path: Optional[str]) -> None:
  """Match <stem>.json predictions to <stem>.txt ground truth."""
  gts = sorted(Path(gt_dir).glob("*.txt"))
  if not gts:
    raise CorpusError(f"no ground-truth files in {gt_dir}")
  stems, pairs = [], []
  for gt_path in gts:
    pred_path = Path(pred_dir) / f"{gt_path.stem}.json"
    dets = _read_predictions(pred_path) if pred_path.exists() else []
    stems.append(gt_path.stem)
    pairs.append((dets, read_annotations(gt_path)))

  reports, summary = evaluate_corpus(pairs, iou)
  for stem, report in zip(stems, reports):
    click.echo(str(report.to_record(image=stem)))
  click.echo(str(summary.to_record(image="*summary*", iou=iou)))
  click.echo(f"{'images':>8} {'P':>7} {'R':>7} {'F':>7}")
  click.echo(f"{len(stems):>8} {100 * summary.precision:>7.2f} {100 * summary.recall:>7.2f} "
             f"{100 * summary.f_score:>7.2f}")
  if curve_path:
    curve = pr_curve(pairs, default_iou_grid())
    write_pr_curve(curve_path, curve)
    for p in curve:
      click.echo(f"iou {p.iou:.2f}  P {100 * p.precision:6.2f}  R {100 * p.recall:6.2f}  F {100 * p.f_score:6.2f}")
    click.echo(f"area under PR curve {pr_curve_area(curve):.4f}")


@main.command()
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--image", "image_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--layer", type=click.Choice(["stage4", "final"]), default="final", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--raw", "raw_path", type=click.Path(dir_okay=False), help="Raw heat map values as CSV.")
@click.option("--box", "box_text", help="Restrict the target to x0,y0,x1,y1 (original image pixels).")
@click.option("--baseline-ckpt", type=click.Path(exists=True, dir_okay=False),
              help="Render baseline and candidate side by side instead of a single overlay.")
@_fdrnet_errors
def gradcam(ckpt_path: str, image_path: str, layer: str, out_path: str, raw_path: Optional[str],
            box_text: Optional[str], baseline_ckpt: Optional[str]) -> None:
  """Grad-CAM heat map of the summed probability map."""
  box = _parse_box(box_text)
  image = load_image(image_path)
  cam_layer = CamLayer(layer)

  checkpoint = load_checkpoint(ckpt_path)
  heat, dets = _heatmap_for(checkpoint, image, cam_layer, box)
  if raw_path:
    write_raw(raw_path, heat)
  if baseline_ckpt:
    baseline = _heatmap_for(load_checkpoint(baseline_ckpt), image, cam_layer, box)
    canvas = comparison_panel(image, (baseline[1], baseline[0]), (dets, heat))
  else:
    canvas = render_heatmap(image, heat)
  Path(out_path).parent.mkdir(parents=True, exist_ok=True)
  cv2.imwrite(out_path, canvas)
  click.echo(f"wrote {out_path}")


def _heatmap_for(checkpoint: Checkpoint, image: np.ndarray, layer: CamLayer,
                 box: Optional[tuple[int, int, int, int]]) -> tuple[HeatMap, list[Detection]]:
  """Heat map resized to the original image, plus detections in original coordinates."""
  h, w = image.shape[:2]
  padded, scale = resize_short_edge(image, checkpoint.config.infer.short_edge, checkpoint.config.infer.multiple)
  nh, nw = max(1, round(h * scale)), max(1, round(w * scale))
  region = None if box is None else tuple(int(round(v * scale)) for v in box)
  model = checkpoint.build_detector()
  with GradCam(model, layer) as cam:
    heat, out = cam(normalize(padded).unsqueeze(0), region)
  normalized = cv2.resize(heat.normalized[:nh, :nw], (w, h), interpolation=cv2.INTER_LINEAR)
  prob = out.prob[0, 0, :nh, :nw].detach().double().numpy()
  dets = [Detection(polygon=d.polygon * [w / nw, h / nh], score=d.score)
          for d in detect(prob, checkpoint.config.postprocess)]
  return HeatMap(raw=heat.raw, normalized=normalized), dets


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--study", type=click.Choice(["modules", "cla", "lowlevel"]), default="modules", show_default=True)
@_fdrnet_errors
def ablate(config_path: Optional[str], data_dir: str, out_dir: str, study: str) -> None:
  """Train every variant of a study on one corpus and compare them."""
  harness = STUDIES[study](_config(config_path), load_corpus(data_dir), out_dir)
  click.echo(format_table(harness.run_all()))


if __name__ == "__main__":
  main()
