import csv
import json
import tempfile
import unittest
from pathlib import Path

import numpy as np
from click.testing import CliRunner

from fdrnet.cli import main
from fdrnet.core.config import dump_config
from fdrnet.core.message import JsonRecord
from fdrnet.evaluation.metrics import default_iou_grid
from fdrnet.evaluation.postprocess import Detection
from fdrnet.labels.annotation import TextAnnotation, write_annotations
from fdrnet.training.trainer_test import small_model_config


def _rect(x0: float, y0: float, x1: float, y1: float) -> np.ndarray:
  return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=np.float64)


class TestEvalCommand(unittest.TestCase):
  def setUp(self) -> None:
    self.tmp = tempfile.TemporaryDirectory()
    self.dir = Path(self.tmp.name)
    self.gt_dir, self.pred_dir = self.dir / "gt", self.dir / "pred"
    self.gt_dir.mkdir()
    self.pred_dir.mkdir()
    self.runner = CliRunner()

  def tearDown(self) -> None:
    self.tmp.cleanup()

  def _write_pred(self, stem: str, dets: list[Detection]) -> None:
    record = JsonRecord({"image": f"{stem}.png", "detections": [d.to_dict() for d in dets]})
    (self.pred_dir / f"{stem}.json").write_text(record.to_line(), encoding="utf-8")

  def test_counts_and_summary(self) -> None:
    write_annotations(self.gt_dir / "a.txt", [TextAnnotation(_rect(0, 0, 40, 20)), TextAnnotation(_rect(50, 0, 90, 20))])
    write_annotations(self.gt_dir / "b.txt", [TextAnnotation(_rect(0, 0, 40, 20))])
    self._write_pred("a", [Detection(_rect(0, 0, 40, 20), 0.9), Detection(_rect(0, 60, 10, 70), 0.8)])
    # b has no prediction file: every instance is missed.
    result = self.runner.invoke(main, ["eval", "--pred-dir", str(self.pred_dir), "--gt-dir", str(self.gt_dir)])
    self.assertEqual(result.exit_code, 0, result.output)
    lines = result.output.splitlines()
    summary = json.loads(lines[2])
    self.assertEqual(summary["image"], "*summary*")
    self.assertEqual((summary["tp"], summary["fp"], summary["fn"]), (1, 1, 2))
    self.assertEqual(json.loads(lines[0])["image"], "a")
    self.assertIn("50.00", lines[4])

  def test_pr_curve(self) -> None:
    write_annotations(self.gt_dir / "a.txt", [TextAnnotation(_rect(0, 0, 40, 20))])
    self._write_pred("a", [Detection(_rect(2, 0, 42, 20), 0.9)])
    out = self.dir / "pr.csv"
    result = self.runner.invoke(main, ["eval", "--pred-dir", str(self.pred_dir), "--gt-dir", str(self.gt_dir),
                                       "--pr-curve", str(out)])
    self.assertEqual(result.exit_code, 0, result.output)
    with open(out, newline="", encoding="utf-8") as f:
      rows = list(csv.DictReader(f))
    self.assertEqual([r["iou"] for r in rows], [f"{t:.2f}" for t in default_iou_grid()])
    self.assertEqual(set(rows[0]), {"iou", "precision", "recall", "f_score"})
    # IoU of the shifted box is 38 / 42, so it matches up to 0.90 only.
    self.assertEqual(rows[0]["f_score"], "1.0000")
    self.assertEqual(rows[-1]["f_score"], "0.0000")
    self.assertIn("iou 0.95", result.output)
    self.assertIn("area under PR curve", result.output)

  def test_no_ground_truth(self) -> None:
    result = self.runner.invoke(main, ["eval", "--pred-dir", str(self.pred_dir), "--gt-dir", str(self.gt_dir)])
    self.assertEqual(result.exit_code, 1)
    self.assertIn("no ground-truth files", result.output)


class TestPipeline(unittest.TestCase):
  """gen-data -> train -> infer -> eval -> gradcam on a tiny model."""

  def setUp(self) -> None:
    self.tmp = tempfile.TemporaryDirectory()
    self.dir = Path(self.tmp.name)
    self.runner = CliRunner()
    self.config_path = self.dir / "run.toml"
    config = small_model_config(train__max_iter=2, infer__short_edge=64)
    self.config_path.write_text(dump_config(config), encoding="utf-8")

  def tearDown(self) -> None:
    self.tmp.cleanup()

  def _ok(self, *args: str) -> str:
    result = self.runner.invoke(main, list(args))
    self.assertEqual(result.exit_code, 0, result.output)
    return result.output

  def test_end_to_end(self) -> None:
    data, run, pred = self.dir / "data", self.dir / "run", self.dir / "pred"
    self._ok("gen-data", "--spec", str(self.config_path), "--out", str(data), "--count", "2", "--seed", "3")
    self.assertEqual(sorted(p.name for p in data.iterdir()),
                     ["synth_00000.png", "synth_00000.txt", "synth_00001.png", "synth_00001.txt"])

    out = self._ok("train", "--config", str(self.config_path), "--data", str(data), "--out", str(run))
    ckpt = run / "final.ckpt"
    self.assertEqual(out.strip(), str(ckpt))

    self._ok("infer", "--ckpt", str(ckpt), "--image", str(data), "--out", str(pred), "--vis", str(self.dir / "vis"))
    record = JsonRecord.from_line((pred / "synth_00000.json").read_text(encoding="utf-8"))
    self.assertEqual(record["image"], "synth_00000.png")
    self.assertIsInstance(record["detections"], list)
    self.assertTrue((self.dir / "vis" / "synth_00001.png").exists())

    single = self.dir / "single.json"
    self._ok("infer", "--ckpt", str(ckpt), "--image", str(data / "synth_00000.png"), "--out", str(single),
             "--short-edge", "96")
    self.assertTrue(single.exists())

    self._ok("eval", "--pred-dir", str(pred), "--gt-dir", str(data))

    heat, raw = self.dir / "heat.png", self.dir / "heat.csv"
    self._ok("gradcam", "--ckpt", str(ckpt), "--image", str(data / "synth_00000.png"), "--layer", "stage4",
             "--out", str(heat), "--raw", str(raw), "--box", "0,0,48,32", "--baseline-ckpt", str(ckpt))
    self.assertTrue(heat.exists())
    self.assertEqual(np.loadtxt(raw, delimiter=",").shape, (2, 3))

  def test_bad_box_and_bad_config(self) -> None:
    image = self.dir / "x.png"
    image.write_bytes(b"")
    result = self.runner.invoke(main, ["gradcam", "--ckpt", str(self.config_path), "--image", str(image),
                                       "--out", str(self.dir / "o.png"), "--box", "5,5,1,1"])
    self.assertNotEqual(result.exit_code, 0)
    bad = self.dir / "bad.toml"
    bad.write_text("train.lr = 1\n", encoding="utf-8")
    result = self.runner.invoke(main, ["gen-data", "--spec", str(bad), "--out", str(self.dir / "d")])
    self.assertEqual(result.exit_code, 1)
    self.assertIn("train.lr", result.output)


if __name__ == "__main__":
  unittest.main()
