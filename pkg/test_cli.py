#!/usr/bin/env python3
"""Sub-commands end to end and their exit codes."""

import json
import os
import sys
import tempfile
import unittest
from argparse import Namespace
from unittest import mock

import numpy as np
from PIL import Image

sys.argv = [sys.argv[0]]

from src.audio.wav import Waveform, write_wav
from src.autodiff.gradcheck import GradcheckReport
from src.config import parser
from src.handlers.command_handler import CommandHandler, probe_residual
from src.model.checkpoint import load_checkpoint, save_checkpoint
from src.model.config import PRESETS
from src.model.network import V2EMModel
from src.pipeline.store import SegmentStore

TINY = PRESETS["tiny"]


def run(*argv) -> int:
    return CommandHandler(parser.parse_args(list(argv))).handle()


def write_assets(root: str, seconds: float = 8.0):
    rng = np.random.default_rng(50)
    t = np.arange(int(seconds * 8000)) / 8000
    write_wav(os.path.join(root, "audio.wav"), Waveform(0.3 * np.sin(2 * np.pi * 500 * t), 8000))
    os.makedirs(os.path.join(root, "frames"))
    for ms in range(0, int(seconds * 1000), 1000):
        pixels = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
        Image.fromarray(pixels).save(os.path.join(root, "frames", f"frame_{ms:05d}.png"))
    with open(os.path.join(root, "transcript.jsonl"), "w", encoding="utf-8") as f:
        f.write(json.dumps({"start_s": 0.0, "end_s": 3.0, "text": "what a wonderful day"}) + "\n")
        f.write(json.dumps({"start_s": 4.0, "end_s": 6.5, "text": "we go home"}) + "\n")


def tree_bytes(root: str) -> dict[str, bytes]:
    files = {}
    for directory, _, names in os.walk(root):
        for name in names:
            path = os.path.join(directory, name)
            with open(path, "rb") as f:
                files[os.path.relpath(path, root)] = f.read()
    return files


def read(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


class CliTests(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = self.tmp.name
        self.assets = os.path.join(self.root, "assets")
        write_assets(self.assets)
        self.train_dir = os.path.join(self.root, "train")
        save_checkpoint(V2EMModel.initialize(TINY, 0, random_stats=True), self.train_dir)

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, *parts):
        return os.path.join(self.root, *parts)

    def test_preprocess_writes_a_manifest(self):
        code = run("preprocess", "--audio", os.path.join(self.assets, "audio.wav"),
                   "--frames", os.path.join(self.assets, "frames"),
                   "--transcript", os.path.join(self.assets, "transcript.jsonl"),
                   "--config", "tiny", "--materialize", "--out", self.path("pre"))
        self.assertEqual(code, 0)
        manifest = read(self.path("pre", "manifest.json"))
        self.assertEqual(manifest["duration"], 8.0)
        segments = manifest["segments"]
        self.assertEqual([(s["t0"], s["t1"]) for s in segments], [(0.0, 5.0), (5.0, 8.0)])
        self.assertEqual(segments[0]["frames"], [0.0, 1.0, 2.0, 3.0, 4.0])
        self.assertEqual(segments[1]["audio_range"], [40000, 64000])
        self.assertEqual(len(segments[0]["tokens"]) + len(segments[1]["tokens"]), 7)
        with SegmentStore(self.path("pre", "segments")) as store:
            self.assertEqual(len(store), 2)

    def test_reparam_then_infer(self):
        self.assertEqual(run("reparam", "--model", self.train_dir, "--out", self.path("fused")), 0)
        fused = load_checkpoint(self.path("fused"))
        self.assertEqual(fused.mode, "fused")
        self.assertLess(probe_residual(load_checkpoint(self.train_dir), fused, 0), 1e-3)
        self.assertEqual(run("infer", "--model", self.train_dir, "--input", self.assets,
                             "--out", self.path("train.json"), "--attention-dir", self.path("maps")), 0)
        self.assertEqual(run("infer", "--model", self.path("fused"), "--input", self.assets,
                             "--out", self.path("fused.json"), "--mode", "pre"), 0)
        train_rows, fused_rows = read(self.path("train.json")), read(self.path("fused.json"))
        self.assertEqual(len(train_rows), 3)
        for a, b in zip(train_rows, fused_rows):
            np.testing.assert_allclose(a["probs"], b["probs"], atol=1e-3)
        self.assertEqual(len(os.listdir(self.path("maps"))), 42)

    def test_integrated_and_pre_files_are_identical(self):
        for mode in ("integrated", "pre"):
            self.assertEqual(run("infer", "--model", self.train_dir, "--input", self.assets,
                                 "--out", self.path(f"{mode}.json"), "--mode", mode), 0)
        with open(self.path("integrated.json"), "rb") as a, open(self.path("pre.json"), "rb") as b:
            self.assertEqual(a.read(), b.read())

    def test_reparam_of_a_fused_checkpoint(self):
        run("reparam", "--model", self.train_dir, "--out", self.path("fused"))
        self.assertEqual(run("reparam", "--model", self.path("fused"), "--out", self.path("again")), 2)

    def test_train_toy(self):
        out = self.path("toy")
        code = run("train-toy", "--config", "tiny", "--steps", "2", "--batch", "2", "--eval-every", "0",
                   "--seed", "4", "--out", out)
        self.assertEqual(code, 0)
        self.assertEqual(load_checkpoint(out).mode, "train")
        with open(os.path.join(out, "loss_curve.csv"), encoding="utf-8") as f:
            self.assertEqual(len(f.read().splitlines()), 3)

    def test_eval(self):
        labels = [{"segment_index": 0, "labels": [1, 0, 1, 0, 1, 0]},
                  {"segment_index": 1, "labels": [0, 1, 0, 1, 0, 1]}]
        preds = [dict(row, probs=[0.5] * 6) for row in reversed(labels)]
        preds.append({"scope": "video", "label_set": "iemocap", "probs": [0.5] * 6, "labels": [1] * 6})
        with open(self.path("labels.json"), "w", encoding="utf-8") as f:
            json.dump(labels, f)
        with open(self.path("preds.json"), "w", encoding="utf-8") as f:
            json.dump(preds, f)
        code = run("eval", "--preds", self.path("preds.json"), "--labels", self.path("labels.json"),
                   "--out", self.path("report"))
        self.assertEqual(code, 0)
        self.assertEqual(read(self.path("report.json"))["macro"]["weighted_accuracy"], 1.0)
        self.assertTrue(os.path.exists(self.path("report.txt")))

    def test_eval_errors(self):
        with open(self.path("labels.json"), "w", encoding="utf-8") as f:
            json.dump([{"segment_index": 0, "labels": [0] * 6}], f)
        with open(self.path("two.json"), "w", encoding="utf-8") as f:
            json.dump([{"segment_index": 0, "labels": [0] * 6}, {"segment_index": 1, "labels": [0] * 6}], f)
        with open(self.path("other.json"), "w", encoding="utf-8") as f:
            json.dump([{"segment_index": 4, "labels": [0] * 6}], f)
        with open(self.path("broken.json"), "w", encoding="utf-8") as f:
            f.write("[{")
        self.assertEqual(run("eval", "--preds", self.path("two.json"), "--labels", self.path("labels.json")), 3)
        self.assertEqual(run("eval", "--preds", self.path("other.json"), "--labels", self.path("labels.json")), 3)
        self.assertEqual(run("eval", "--preds", self.path("broken.json"), "--labels", self.path("labels.json")), 3)
        self.assertEqual(run("eval", "--preds", self.path("absent.json"), "--labels", self.path("labels.json")), 2)

    def test_input_and_format_errors(self):
        self.assertEqual(run("infer", "--model", self.path("missing"), "--input", self.assets,
                             "--out", self.path("p.json")), 2)
        self.assertEqual(run("preprocess", "--config", "huge", "--out", self.path("x")), 2)
        self.assertEqual(run("preprocess", "--config", "tiny", "--out", self.path("x")), 2)
        with open(os.path.join(self.train_dir, "manifest.json"), "w", encoding="utf-8") as f:
            f.write("{")
        self.assertEqual(run("infer", "--model", self.train_dir, "--input", self.assets,
                             "--out", self.path("p.json")), 3)

    def test_preprocess_of_a_corrupt_wav(self):
        with open(os.path.join(self.assets, "audio.wav"), "wb") as f:
            f.write(b"this is not a wave file at all")
        code = run("preprocess", "--audio", os.path.join(self.assets, "audio.wav"), "--config", "tiny",
                   "--out", self.path("pre"))
        self.assertEqual(code, 3)

    def test_train_toy_is_reproducible(self):
        for name in ("first", "second"):
            self.assertEqual(run("train-toy", "--config", "tiny", "--steps", "3", "--batch", "2",
                                 "--eval-every", "2", "--seed", "12", "--out", self.path(name)), 0)
        first, second = tree_bytes(self.path("first")), tree_bytes(self.path("second"))
        self.assertIn("manifest.json", first)
        self.assertGreater(len(first), 10)
        self.assertEqual(first, second)

    def test_seed_only_where_it_matters(self):
        with self.assertRaises(SystemExit):
            parser.parse_args(["eval", "--preds", "p.json", "--labels", "l.json", "--seed", "1"])

    def test_unknown_command(self):
        self.assertEqual(CommandHandler(Namespace(command="dance")).handle(), 2)


class GradcheckCommandTests(unittest.TestCase):
    def test_exit_codes(self):
        target = "src.handlers.command_handler.run_suite"
        with mock.patch(target, return_value=[GradcheckReport("matmul", 1e-8)]) as suite:
            self.assertEqual(run("gradcheck"), 0)
            suite.assert_called_once_with(0, False)
        with mock.patch(target, return_value=[GradcheckReport("matmul", 0.09)]) as suite:
            self.assertEqual(run("gradcheck", "--inject-bug", "--seed", "3"), 4)
            suite.assert_called_once_with(3, True)
        with mock.patch(target, side_effect=RuntimeError("boom")):
            self.assertEqual(run("gradcheck"), 4)

    def test_injected_bug_fails_the_real_suite(self):
        self.assertEqual(run("gradcheck", "--inject-bug"), 4)


if __name__ == "__main__":
    unittest.main()
