import unittest

from fdrnet.core.config import RunConfig, dump_config, parse_config
from fdrnet.core.errors import ConfigError


class TestRunConfig(unittest.TestCase):
  def test_defaults(self) -> None:
    c = RunConfig()
    self.assertEqual(c.train.lr0, 0.007)
    self.assertEqual(c.train.power, 0.9)
    self.assertEqual(c.train.weight_decay, 1e-4)
    self.assertEqual(c.train.momentum, 0.9)
    self.assertTrue(c.train.nesterov)
    self.assertEqual(c.train.image_size, 640)
    self.assertEqual(c.model.fused_channels, 256)
    self.assertEqual(c.model.cla_placement, ["out2"])
    self.assertEqual(c.model.low_level_channels, 48)
    self.assertEqual(c.model.k, 50.0)
    self.assertEqual((c.loss.alpha, c.loss.beta), (5.0, 10.0))
    self.assertEqual(c.labels.shrink_ratio, 0.4)
    self.assertEqual((c.labels.thresh_min, c.labels.thresh_max), (0.3, 0.7))
    self.assertEqual(c.postprocess.unclip_ratio, 1.5)
    self.assertEqual(c.infer.short_edge, 736)
    c.validate()

  def test_flat_keys_are_sorted_and_sectioned(self) -> None:
    flat = RunConfig().to_flat()
    self.assertEqual(list(flat), sorted(flat))
    self.assertIn("fdr.low_level_stage", flat)
    self.assertIn("model.enable_fdr", flat)
    self.assertNotIn("model.low_level_stage", flat)

  def test_parse_tables_and_dotted_keys(self) -> None:
    text = """
train.lr0 = 0.01
[model]
enable_cla = false
cla_placement = ["out2", "out3"]
[fdr]
low_level_stage = "conv3"
"""
    c = parse_config(text)
    self.assertEqual(c.train.lr0, 0.01)
    self.assertFalse(c.model.enable_cla)
    self.assertEqual(c.model.cla_placement, ["out2", "out3"])
    self.assertEqual(c.model.low_level_stage, "conv3")

  def test_int_accepted_for_float_key(self) -> None:
    c = parse_config("loss.alpha = 5\n")
    self.assertIsInstance(c.loss.alpha, float)

  def test_unknown_keys_are_errors(self) -> None:
    with self.assertRaises(ConfigError) as cm:
      parse_config("train.lr = 0.1\nmodel.colour = 1\n")
    self.assertIn("train.lr", str(cm.exception))
    self.assertIn("model.colour", str(cm.exception))

  def test_wrong_types_are_errors(self) -> None:
    with self.assertRaises(ConfigError):
      parse_config('train.max_iter = "ten"\n')
    with self.assertRaises(ConfigError):
      parse_config("model.enable_fdr = 1\n")

  def test_invalid_values_are_errors(self) -> None:
    for text in ("train.lr0 = -1.0\n", "model.cla_placement = []\n", 'model.cla_placement = ["out9"]\n',
                 "train.image_size = 100\n", 'fdr.low_level_stage = "conv5"\n', "labels.shrink_ratio = 1.0\n"):
      with self.subTest(text=text), self.assertRaises(ConfigError):
        parse_config(text)

  def test_invalid_toml(self) -> None:
    with self.assertRaises(ConfigError):
      parse_config("train.lr0 = = 1\n")

  def test_dump_parses_back(self) -> None:
    c = RunConfig().replace(train__max_iter=7, model__enable_fdr=False, fdr__low_level_stage="conv3")
    again = parse_config(dump_config(c))
    self.assertEqual(again.to_flat(), c.to_flat())
    self.assertEqual(again.train.max_iter, 7)

  def test_replace_leaves_original_untouched(self) -> None:
    base = RunConfig()
    changed = base.replace(model__cla_placement=["out2", "out3"])
    self.assertEqual(base.model.cla_placement, ["out2"])
    self.assertEqual(changed.model.cla_placement, ["out2", "out3"])


if __name__ == "__main__":
  unittest.main()
