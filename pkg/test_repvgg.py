#!/usr/bin/env python3
"""Multi-branch blocks, their fusion and the FLOP/parameter accounting."""

import sys
import unittest

import numpy as np
from hypothesis import given, settings, strategies as st

sys.argv = [sys.argv[0]]

from src.errors import AlreadyFused, ConfigError, DimensionMismatch
from src.model.config import PRESETS
from src.model.network import V2EMModel
from src.tensor import ops
from src.tensor.tensor import BatchNormParams, DType, randn, uniform
from src.vision.repvgg import DEFAULT_LAYERS, FusedBlockParams, LayerSpec, TrainBlockParams, VisionNetConfig, \
    blocks_from_state, block_forward_fused, block_forward_train, count_flops, count_params, fold_bn, \
    frame_features, fuse_block, fuse_network, identity_to_3x3, init_vision, pad_1x1_to_3x3

F32, F64 = DType.F32, DType.F64


def random_bn(rng, channels, dtype):
    return BatchNormParams(uniform(rng, (channels,), 0.5, 1.5, dtype), randn(rng, (channels,), 0.3, dtype),
                           randn(rng, (channels,), 0.3, dtype), uniform(rng, (channels,), 0.5, 1.5, dtype))


def random_block(rng, c_in, c_out, stride, dtype):
    spec = LayerSpec(c_in, c_out, stride)
    return TrainBlockParams(randn(rng, (c_out, c_in, 3, 3), 0.5, dtype), random_bn(rng, c_out, dtype),
                            randn(rng, (c_out, c_in, 1, 1), 0.5, dtype), random_bn(rng, c_out, dtype),
                            random_bn(rng, c_out, dtype) if spec.has_identity else None, stride)


def chain(first, rest, stride=1):
    return (LayerSpec(3, first, stride),) + tuple(LayerSpec(first, first, 1) for _ in range(rest))


class KernelTests(unittest.TestCase):
    def test_pad_1x1_places_the_tap_in_the_center(self):
        kernel = randn(np.random.default_rng(0), (2, 3, 1, 1), 1.0, F64)
        padded = pad_1x1_to_3x3(kernel).array.copy()
        np.testing.assert_array_equal(padded[:, :, 1, 1], kernel.array[:, :, 0, 0])
        padded[:, :, 1, 1] = 0
        self.assertFalse(padded.any())
        with self.assertRaises(DimensionMismatch):
            pad_1x1_to_3x3(randn(np.random.default_rng(0), (2, 3, 3, 3)))

    def test_dirac_kernel_is_identity(self):
        x = randn(np.random.default_rng(1), (4, 5, 5), 1.0, F64)
        np.testing.assert_array_equal(ops.conv2d(x, identity_to_3x3(4, F64), None, 1, 1).array, x.array)

    def test_fold_bn_matches_conv_then_bn(self):
        rng = np.random.default_rng(2)
        x = randn(rng, (3, 6, 6), 1.0, F64)
        kernel = randn(rng, (4, 3, 3, 3), 1.0, F64)
        bn = random_bn(rng, 4, F64)
        folded, bias = fold_bn(kernel, bn)
        expected = ops.batch_norm_eval(ops.conv2d(x, kernel, None, 1, 1), bn)
        np.testing.assert_allclose(ops.conv2d(x, folded, bias, 1, 1).array, expected.array, atol=1e-12)


class FusionTests(unittest.TestCase):
    def test_random_blocks_are_equivalent(self):
        rng = np.random.default_rng(3)
        for trial in range(120):
            c_in = int(rng.integers(1, 5))
            c_out = c_in if trial % 2 == 0 else int(rng.integers(1, 5))
            stride = 1 if trial % 3 else 2
            side = int(rng.integers(3, 8))
            for dtype, tolerance in ((F64, 1e-10), (F32, 1e-4)):
                local = np.random.default_rng([3, trial])
                block = random_block(local, c_in, c_out, stride, dtype)
                x = randn(local, (c_in, side, side), 1.0, dtype)
                train = block_forward_train(x, block).array.astype(np.float64)
                fused = block_forward_fused(x, fuse_block(block)).array.astype(np.float64)
                self.assertLess(float(np.abs(train - fused).max()), tolerance, (trial, dtype))

    def test_six_block_network_end_to_end(self):
        cfg = VisionNetConfig(DEFAULT_LAYERS, side=32)
        state = init_vision(np.random.default_rng(4), cfg, F32, random_stats=True)
        train_blocks = blocks_from_state(state, cfg, "train")
        fused_blocks = fuse_network(train_blocks)
        frames = [uniform(np.random.default_rng([4, k]), (3, 32, 32), 0.0, 1.0, F32) for k in range(3)]
        train = frame_features(frames, train_blocks).array
        fused = frame_features(frames, fused_blocks).array
        self.assertEqual(train.shape, (3, 128))
        self.assertLess(float(np.abs(train - fused).max()), 1e-3)

    def test_fusing_twice_is_rejected(self):
        fused = fuse_block(random_block(np.random.default_rng(5), 2, 2, 1, F64))
        self.assertIsInstance(fused, FusedBlockParams)
        with self.assertRaises(AlreadyFused):
            fuse_block(fused)
        model = V2EMModel.initialize(PRESETS["tiny"])
        with self.assertRaises(AlreadyFused):
            model.fused().fused()

    def test_identity_branch_needs_matching_shapes(self):
        rng = np.random.default_rng(6)
        with self.assertRaises(DimensionMismatch):
            TrainBlockParams(randn(rng, (2, 2, 3, 3)), random_bn(rng, 2, F32), randn(rng, (2, 2, 1, 1)),
                             random_bn(rng, 2, F32), random_bn(rng, 2, F32), 2)

    def test_empty_frame_list(self):
        cfg = VisionNetConfig(chain(4, 5), side=8)
        blocks = blocks_from_state(init_vision(np.random.default_rng(7), cfg), cfg, "train")
        self.assertEqual(frame_features([], blocks).shape, (0, 4))


class AccountingTests(unittest.TestCase):
    def test_worked_eight_channel_example(self):
        cfg = VisionNetConfig(chain(8, 5), side=4)
        self.assertEqual(count_params(cfg, "train").per_layer[1], 736)
        self.assertEqual(count_params(cfg, "fused").per_layer[1], 584)

    def test_flops_of_one_identity_layer(self):
        cfg = VisionNetConfig(chain(8, 5), side=4)
        self.assertEqual(count_flops(cfg, "train").per_layer[1], 2 * (72 + 8 + 1) * 8 * 16)
        self.assertEqual(count_flops(cfg, "fused").per_layer[1], 2 * 72 * 8 * 16)

    def test_counts_match_initialized_state(self):
        cfg = VisionNetConfig(DEFAULT_LAYERS, side=16)
        state = init_vision(np.random.default_rng(8), cfg)
        self.assertEqual(count_params(cfg, "train").total, sum(t.size for t in state.values()))
        fused = fuse_network(blocks_from_state(state, cfg, "train"))
        self.assertEqual(count_params(cfg, "fused").total,
                         sum(b.kernel.size + b.bias.size for b in fused))

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.integers(1, 16), st.sampled_from([1, 2])), min_size=6, max_size=6),
           st.integers(4, 64))
    def test_fused_is_always_smaller(self, layers, side):
        specs, c_in = [], 3
        for c_out, stride in layers:
            specs.append(LayerSpec(c_in, c_out, stride))
            c_in = c_out
        cfg = VisionNetConfig(tuple(specs), side=side)
        self.assertLess(count_params(cfg, "fused").total, count_params(cfg, "train").total)
        self.assertLess(count_flops(cfg, "fused").total, count_flops(cfg, "train").total)

    def test_invalid_configs(self):
        with self.assertRaises(ConfigError):
            VisionNetConfig(DEFAULT_LAYERS[:5])
        with self.assertRaises(ConfigError):
            VisionNetConfig((LayerSpec(3, 4),) + (LayerSpec(5, 5),) * 5)
        with self.assertRaises(ConfigError):
            count_params(VisionNetConfig(), "half")


if __name__ == "__main__":
    unittest.main()
