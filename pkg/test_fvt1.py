#!/usr/bin/env python3
"""FVT1 tensor files and checkpoint directories."""

import json
import os
import struct
import sys
import tempfile
import unittest

import numpy as np

sys.argv = [sys.argv[0]]

from src.errors import CheckpointError, TensorFormatError
from src.model.checkpoint import MANIFEST, load_checkpoint, save_checkpoint
from src.model.config import PRESETS
from src.model.network import V2EMModel
from src.tensor import fvt1
from src.tensor.tensor import DType, Tensor, randn


class Fvt1Tests(unittest.TestCase):
    def test_header_layout(self):
        blob = fvt1.encode(Tensor([[1.0, 2.0, 3.0]], DType.F64))
        self.assertEqual(blob[:4], b"FVT1")
        self.assertEqual(blob[4], 1)
        self.assertEqual(blob[5], 2)
        self.assertEqual(blob[6:8], b"\x00\x00")
        self.assertEqual(struct.unpack("<2I", blob[8:16]), (1, 3))
        self.assertEqual(len(blob), 16 + 3 * 8)

    def test_values_survive_exactly(self):
        rng = np.random.default_rng(3)
        for dtype in DType:
            tensor = randn(rng, (2, 3, 4), 1.0, dtype)
            decoded = fvt1.decode(fvt1.encode(tensor))
            self.assertIs(decoded.dtype, dtype)
            self.assertTrue(decoded.equals(tensor))

    def test_scalar_and_empty_tensors(self):
        for tensor in (Tensor(2.5), Tensor(np.zeros((0, 5)))):
            decoded = fvt1.decode(fvt1.encode(tensor))
            self.assertEqual(decoded.shape, tensor.shape)

    def test_corrupt_blobs(self):
        blob = fvt1.encode(Tensor([1.0, 2.0]))
        cases = {
            "short header": blob[:5],
            "bad magic": b"XXXX" + blob[4:],
            "unknown dtype": blob[:4] + b"\x07" + blob[5:],
            "reserved bytes": blob[:6] + b"\x01\x00" + blob[8:],
            "truncated payload": blob[:-1],
            "trailing bytes": blob + b"\x00",
        }
        for label, corrupt in cases.items():
            with self.subTest(label):
                with self.assertRaises(TensorFormatError):
                    fvt1.decode(corrupt)

    def test_save_and_load(self):
        tensor = Tensor(np.arange(6.0).reshape(2, 3), DType.F64)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "nested", "t.fvt")
            fvt1.save(path, tensor)
            self.assertTrue(fvt1.load(path).equals(tensor))


class CheckpointTests(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.model = V2EMModel.initialize(PRESETS["tiny"], seed=5)

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip_is_bit_identical(self):
        save_checkpoint(self.model, self.tmp.name)
        loaded = load_checkpoint(self.tmp.name)
        self.assertEqual(loaded.mode, "train")
        self.assertEqual(loaded.config.to_dict(), self.model.config.to_dict())
        self.assertEqual(set(loaded.state), set(self.model.state))
        for name, tensor in self.model.state.items():
            self.assertTrue(loaded.state[name].equals(tensor), name)

    def test_fused_round_trip(self):
        fused = self.model.fused()
        save_checkpoint(fused, self.tmp.name)
        loaded = load_checkpoint(self.tmp.name)
        self.assertEqual(loaded.mode, "fused")
        self.assertEqual(set(loaded.state), set(fused.state))

    def test_manifest_lists_roles(self):
        save_checkpoint(self.model, self.tmp.name)
        with open(os.path.join(self.tmp.name, MANIFEST), encoding="utf-8") as f:
            manifest = json.load(f)
        roles = {entry["name"]: entry["role"] for entry in manifest["tensors"]}
        self.assertEqual(roles["vision.block0.bn3.running_var"], "buffer")
        self.assertEqual(roles["vision.block0.conv3"], "param")

    def test_missing_tensor_file(self):
        save_checkpoint(self.model, self.tmp.name)
        with open(os.path.join(self.tmp.name, MANIFEST), encoding="utf-8") as f:
            manifest = json.load(f)
        os.remove(os.path.join(self.tmp.name, manifest["tensors"][0]["file"]))
        with self.assertRaises(CheckpointError):
            load_checkpoint(self.tmp.name)

    def test_shape_mismatch_in_manifest(self):
        save_checkpoint(self.model, self.tmp.name)
        path = os.path.join(self.tmp.name, MANIFEST)
        with open(path, encoding="utf-8") as f:
            manifest = json.load(f)
        manifest["tensors"][0]["shape"] = [999]
        with open(path, "w", encoding="utf-8") as f:
            json.dump(manifest, f)
        with self.assertRaises(CheckpointError):
            load_checkpoint(self.tmp.name)

    def test_not_a_checkpoint(self):
        with open(os.path.join(self.tmp.name, MANIFEST), "w", encoding="utf-8") as f:
            f.write("{not json")
        with self.assertRaises(CheckpointError):
            load_checkpoint(self.tmp.name)

    def test_missing_directory(self):
        with self.assertRaises(FileNotFoundError):
            load_checkpoint(os.path.join(self.tmp.name, "absent"))


if __name__ == "__main__":
    unittest.main()
