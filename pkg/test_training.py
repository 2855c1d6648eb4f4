#!/usr/bin/env python3
"""Toy training on synthetic samples and its output files."""

import csv
import json
import os
import sys
import tempfile
import unittest

import numpy as np

sys.argv = [sys.argv[0]]

from src.autodiff.graph import Graph
from src.model.checkpoint import load_checkpoint
from src.model.config import PRESETS
from src.model.network import V2EMModel
from src.training.synthetic import make_dataset
from src.training.trainer import TrainSettings, batch_loss, train_toy, write_training_outputs
from src.vision.repvgg import is_buffer

TINY = PRESETS["tiny"]
QUICK = TrainSettings(steps=4, batch=2, eval_every=2, train_size=6, eval_size=4)


def same_state(a, b) -> bool:
    return a.keys() == b.keys() and all(a[name].equals(b[name]) for name in a)


class SyntheticDataTests(unittest.TestCase):
    def test_samples_carry_every_modality(self):
        sample = make_dataset(np.random.default_rng(40), TINY, 1)[0]
        self.assertEqual(len(sample.labels), 6)
        self.assertEqual(len(sample.inputs.spectra), 4)
        self.assertEqual(sample.inputs.frames[0].shape, (3, 8, 8))
        self.assertGreaterEqual(len(sample.inputs.tokens), 4)

    def test_seeded(self):
        first = make_dataset(np.random.default_rng(41), TINY, 3)
        second = make_dataset(np.random.default_rng(41), TINY, 3)
        self.assertEqual([s.labels for s in first], [s.labels for s in second])
        self.assertTrue(first[2].inputs.spectra[1].equals(second[2].inputs.spectra[1]))


class TrainerTests(unittest.TestCase):
    def test_same_seed_same_parameters(self):
        first = train_toy(TINY, 5, QUICK)
        second = train_toy(TINY, 5, QUICK)
        self.assertEqual(first.losses, second.losses)
        self.assertTrue(same_state(first.model.state, second.model.state))
        self.assertEqual([step for step, _ in first.history], [2, 4])

    def test_zero_steps_keeps_the_initialization(self):
        result = train_toy(TINY, 6, TrainSettings(steps=0, train_size=2, eval_size=2))
        self.assertEqual(result.losses, [])
        self.assertTrue(same_state(result.model.state, V2EMModel.initialize(TINY, 6).state))

    def test_buffers_are_not_trained(self):
        initial = V2EMModel.initialize(TINY, 7)
        trained = train_toy(TINY, 7, QUICK).model
        buffers = [name for name in initial.state if is_buffer(name)]
        self.assertTrue(buffers)
        self.assertTrue(all(trained.state[name].equals(initial.state[name]) for name in buffers))
        self.assertTrue(initial.trainable().isdisjoint(buffers))
        self.assertFalse(trained.state["fusion.head.w2"].equals(initial.state["fusion.head.w2"]))

    def test_overfits_a_fixed_batch(self):
        result = train_toy(TINY, 8, TrainSettings(steps=30, batch=2, lr=1e-2, eval_every=0, train_size=2, eval_size=2))
        self.assertEqual(len(result.losses), 30)
        self.assertLess(result.losses[-1], result.losses[0])
        self.assertEqual(result.history, [])

    def test_loss_is_scalar_bce(self):
        model = V2EMModel.initialize(TINY, 9)
        samples = make_dataset(np.random.default_rng(9), TINY, 2)
        _, loss = batch_loss(model, samples)
        self.assertEqual(loss.value.shape, ())
        self.assertGreater(loss.value.item(), 0.0)

    def test_recorded_forward_reads_batch_norm_statistics(self):
        model = V2EMModel.initialize(TINY, 11, random_stats=True)
        samples = make_dataset(np.random.default_rng(11), TINY, 2)
        recording = Graph()
        params = recording.parameters(model.state, model.trainable())
        for sample in samples:
            recorded = model.segment_logits(sample.inputs, params, recording)[1]
            np.testing.assert_allclose(recorded.array, model.segment_logits(sample.inputs)[1].array, atol=1e-6)
        graph, loss = batch_loss(model, samples)
        grads = graph.backward(loss)
        self.assertEqual(set(grads), model.trainable())
        self.assertTrue(any(np.abs(grads[name].array).sum() > 0 for name in grads if name.startswith("vision.")))

    def test_replication_schedule(self):
        settings = TrainSettings.replication()
        self.assertEqual((settings.steps, settings.batch, settings.lr, settings.eval_every), (960, 8, 4.5e-6, 32))

    def test_output_files(self):
        result = train_toy(TINY, 10, QUICK)
        with tempfile.TemporaryDirectory() as tmp:
            write_training_outputs(result, tmp)
            with open(os.path.join(tmp, "loss_curve.csv"), newline="", encoding="utf-8") as f:
                rows = list(csv.reader(f))
            with open(os.path.join(tmp, "eval_history.json"), encoding="utf-8") as f:
                history = json.load(f)
            restored = load_checkpoint(tmp)
        self.assertEqual(rows[0], ["step", "loss"])
        self.assertEqual([float(row[1]) for row in rows[1:]], result.losses)
        self.assertEqual([e["step"] for e in history["evaluations"]], [2, 4])
        self.assertIn("max_f1", history["summary"])
        self.assertTrue(same_state(restored.state, result.model.state))


@unittest.skipUnless(os.environ.get("FV2ES_SLOW"), "set FV2ES_SLOW=1 to run the 200-step toy training")
class ToyLearnabilityTests(unittest.TestCase):
    def test_toy_model_learns_the_generator(self):
        result = train_toy(PRESETS["toy"], 0, TrainSettings())
        self.assertEqual(len(result.losses), 200)
        self.assertLessEqual(result.losses[-1], 0.5 * result.losses[0])
        step, report = result.history[-1]
        self.assertEqual(step, 200)
        self.assertGreaterEqual(report.macro_weighted_accuracy, 0.9)


if __name__ == "__main__":
    unittest.main()
