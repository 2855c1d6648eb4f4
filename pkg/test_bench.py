#!/usr/bin/env python3
"""Timing summaries and the train/fused benchmark report."""

import json
import os
import sys
import unittest

import numpy as np

sys.argv = [sys.argv[0]]

from src.bench.harness import Timing, bench_pipeline, bench_vision, run_bench, speedup, time_runs
from src.errors import ArchitectureMismatch
from src.fusion.head import EmotionScores
from src.model.config import PRESETS
from src.model.network import V2EMModel
from src.training.synthetic import synthetic_assets

TINY = PRESETS["tiny"]


class ConstantModel:
    """Skips inference so a pipeline run costs only its input handling."""

    def __init__(self, config):
        self.config = config

    def predict(self, inputs):
        return EmotionScores((0.5,) * 6, self.config.fusion.label_set)


class TimingTests(unittest.TestCase):
    def test_percentiles(self):
        timing = Timing.of([float(v) for v in range(1, 12)])
        self.assertEqual((timing.median, timing.p10, timing.p90, timing.runs), (6.0, 2.0, 10.0, 11))

    def test_speedup_from_medians(self):
        self.assertAlmostEqual(speedup(Timing(2.0, 0, 0, 1), Timing(0.5, 0, 0, 1)), 0.75)
        self.assertEqual(speedup(Timing(0.0, 0, 0, 1), Timing(0.0, 0, 0, 1)), 0.0)

    def test_warmup_runs_are_not_timed(self):
        calls = []
        first, second = time_runs([lambda: calls.append("a"), lambda: calls.append("b")], 4, 3)
        self.assertEqual(calls, ["a", "b"] * 7)
        self.assertEqual((first.runs, second.runs), (4, 4))


class BenchReportTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.train = V2EMModel.initialize(TINY, 1, random_stats=True)
        cls.fused = cls.train.fused()

    def test_vision_and_pipeline(self):
        assets = synthetic_assets(np.random.default_rng(60), TINY, 6.0)
        report = run_bench(self.train, self.fused, batch=2, iters=3, warmup=1, assets=assets, pipeline_iters=2)
        self.assertEqual(report.train.runs, 3)
        self.assertLess(report.fused_flops, report.train_flops)
        self.assertLess(report.fused_vision_params, report.train_vision_params)
        self.assertEqual(report.train_params["text"], report.fused_params["text"])
        self.assertLess(report.fused_params["visual"], report.train_params["visual"])
        self.assertTrue(report.predictions_identical)
        self.assertEqual(report.pre.runs, 2)
        self.assertIn("pipeline speedup", report.to_text())
        self.assertEqual(json.loads(report.to_json())["train_flops"], report.train_flops)

    def test_vision_only(self):
        report = run_bench(self.train, self.fused, batch=1, iters=2, warmup=0)
        self.assertIsNone(report.integrated)
        self.assertNotIn("pipeline", report.to_text())

    def test_pre_mode_pays_for_its_artifacts(self):
        assets = synthetic_assets(np.random.default_rng(61), TINY, 30.0)
        integrated, pre, identical = bench_pipeline(ConstantModel(TINY), assets, 5)
        self.assertTrue(identical)
        self.assertGreater(speedup(pre, integrated), 0.0)

    def test_pairing_is_checked(self):
        with self.assertRaises(ArchitectureMismatch):
            run_bench(self.fused, self.train, iters=1, warmup=0)
        other = V2EMModel.initialize(PRESETS["toy"]).fused()
        with self.assertRaises(ArchitectureMismatch):
            run_bench(self.train, other, iters=1, warmup=0)



@unittest.skipUnless(os.environ.get("FV2ES_SLOW"), "set FV2ES_SLOW=1 to run the full-size timing checks")
class FullSizeBenchTests(unittest.TestCase):
    def test_fused_vision_is_faster(self):
        train = V2EMModel.initialize(PRESETS["default"], 0, random_stats=True)
        slow, fast = bench_vision(train, train.fused(), batch=8, iters=30, warmup=5)
        self.assertLess(fast.median, slow.median)

    def test_integrated_pipeline_is_faster(self):
        train = V2EMModel.initialize(PRESETS["toy"], 0, random_stats=True)
        assets = synthetic_assets(np.random.default_rng(0), PRESETS["toy"], 60.0)
        report = run_bench(train, train.fused(), batch=8, iters=3, warmup=1, assets=assets, pipeline_iters=10)
        self.assertTrue(report.predictions_identical)
        self.assertGreater(report.pipeline_speedup, 0.0)


if __name__ == "__main__":
    unittest.main()
