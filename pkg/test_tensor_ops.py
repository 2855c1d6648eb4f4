#!/usr/bin/env python3
"""Tensor primitives checked against naive loop oracles."""

import math
import sys
import unittest

import numpy as np
from hypothesis import given, settings, strategies as st

sys.argv = [sys.argv[0]]

from src.errors import DimensionMismatch, NonFiniteError
from src.tensor import ops
from src.tensor.tensor import BatchNormParams, DType, LayerNormParams, Tensor, ones, randn, zeros

F64 = DType.F64


def loop_matmul(a, b):
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for p in range(k):
                acc += a[i, p] * b[p, j]
            out[i, j] = acc
    return out


def loop_conv(x, kernel, bias, stride, pad):
    c_in, h, w = x.shape
    c_out, _, k, _ = kernel.shape
    padded = np.zeros((c_in, h + 2 * pad, w + 2 * pad))
    padded[:, pad:pad + h, pad:pad + w] = x
    out_h = (h + 2 * pad - k) // stride + 1
    out_w = (w + 2 * pad - k) // stride + 1
    out = np.zeros((c_out, out_h, out_w))
    for o in range(c_out):
        for y in range(out_h):
            for z in range(out_w):
                acc = 0.0
                for c in range(c_in):
                    for i in range(k):
                        for j in range(k):
                            acc += kernel[o, c, i, j] * padded[c, y * stride + i, z * stride + j]
                out[o, y, z] = acc + (bias[o] if bias is not None else 0.0)
    return out


def loop_maxpool(x, k, stride, pad):
    c, h, w = x.shape
    out_h = (h + 2 * pad - k) // stride + 1
    out_w = (w + 2 * pad - k) // stride + 1
    out = np.zeros((c, out_h, out_w))
    for ch in range(c):
        for y in range(out_h):
            for z in range(out_w):
                best = -math.inf
                for i in range(k):
                    for j in range(k):
                        r, s = y * stride + i - pad, z * stride + j - pad
                        if 0 <= r < h and 0 <= s < w:
                            best = max(best, x[ch, r, s])
                out[ch, y, z] = best
    return out


class TensorTests(unittest.TestCase):
    def test_non_finite_values_are_rejected(self):
        with self.assertRaises(NonFiniteError):
            Tensor([1.0, float("nan")])
        with self.assertRaises(NonFiniteError):
            Tensor([[math.inf]], F64)

    def test_tensors_are_read_only(self):
        t = Tensor([1.0, 2.0])
        with self.assertRaises(ValueError):
            t.array[0] = 5.0

    def test_zero_length_dimensions_are_allowed(self):
        t = zeros((0, 4))
        self.assertEqual(t.shape, (0, 4))
        self.assertEqual(ops.concat([t, ones((2, 4))]).shape, (2, 4))

    def test_mixed_dtypes_are_rejected(self):
        with self.assertRaises(DimensionMismatch):
            ops.add(Tensor([1.0]), Tensor([1.0], F64))

    def test_item_needs_single_value(self):
        self.assertEqual(Tensor([[3.5]]).item(), 3.5)
        with self.assertRaises(DimensionMismatch):
            Tensor([1.0, 2.0]).item()


class MatmulTests(unittest.TestCase):
    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(0, 10_000))
    def test_matches_loop_oracle(self, m, k, n, seed):
        rng = np.random.default_rng(seed)
        a, b = randn(rng, (m, k), 1.0, F64), randn(rng, (k, n), 1.0, F64)
        np.testing.assert_allclose(ops.matmul(a, b).array, loop_matmul(a.array, b.array), rtol=0, atol=1e-12)

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            ops.matmul(zeros((2, 3)), zeros((2, 3)))


class ConvolutionTests(unittest.TestCase):
    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 3), st.integers(1, 3), st.sampled_from([1, 3]), st.integers(1, 2),
           st.integers(0, 1), st.integers(3, 7), st.integers(0, 10_000))
    def test_conv2d_matches_loop_oracle(self, c_in, c_out, k, stride, pad, side, seed):
        rng = np.random.default_rng(seed)
        x = randn(rng, (c_in, side, side), 1.0, F64)
        kernel = randn(rng, (c_out, c_in, k, k), 1.0, F64)
        bias = randn(rng, (c_out,), 1.0, F64)
        out = ops.conv2d(x, kernel, bias, stride, pad)
        expected = loop_conv(x.array, kernel.array, bias.array, stride, pad)
        self.assertEqual(out.shape, expected.shape)
        np.testing.assert_allclose(out.array, expected, rtol=0, atol=1e-11)

    def test_conv2d_rejects_channel_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            ops.conv2d(zeros((2, 4, 4)), zeros((1, 3, 3, 3)))

    def test_conv2d_rejects_kernel_larger_than_input(self):
        with self.assertRaises(DimensionMismatch):
            ops.conv2d(zeros((1, 2, 2)), zeros((1, 1, 3, 3)))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 3), st.integers(3, 8), st.integers(0, 10_000))
    def test_maxpool_matches_loop_oracle(self, channels, side, seed):
        rng = np.random.default_rng(seed)
        x = randn(rng, (channels, side, side), 1.0, F64)
        np.testing.assert_array_equal(ops.maxpool2d(x, 3, 2, 1).array, loop_maxpool(x.array, 3, 2, 1))

    def test_maxpool_padding_never_wins(self):
        x = Tensor(-np.ones((1, 4, 4)) * 5.0, F64)
        out = ops.maxpool2d(x, 3, 2, 1)
        self.assertEqual(out.shape, (1, 2, 2))
        self.assertTrue((out.array == -5.0).all())

    def test_maxpool_accepts_any_pad_below_the_window(self):
        x = randn(np.random.default_rng(3), (2, 5, 5), 1.0, F64)
        for k, stride, pad in ((3, 1, 2), (3, 2, 2), (1, 2, 0), (3, 2, 1)):
            out = ops.maxpool2d(x, k, stride, pad)
            side = (5 + 2 * pad - k) // stride + 1
            self.assertEqual(out.shape, (2, side, side))
            np.testing.assert_array_equal(out.array, loop_maxpool(x.array, k, stride, pad))

    def test_maxpool_rejects_windows_made_only_of_padding(self):
        for k, pad in ((1, 1), (3, 3)):
            with self.assertRaises(DimensionMismatch):
                ops.maxpool2d(zeros((1, 4, 4)), k, 1, pad)

    def test_shape_algebra(self):
        x = zeros((1, 6, 6), F64)
        for k in (1, 3):
            for stride in (1, 2):
                for pad in (0, 1):
                    side = (6 + 2 * pad - k) // stride + 1
                    self.assertEqual(ops.conv2d(x, zeros((2, 1, k, k), F64), None, stride, pad).shape, (2, side, side))
                    if pad < k:
                        self.assertEqual(ops.maxpool2d(x, k, stride, pad).shape, (1, side, side))


class NormalizationTests(unittest.TestCase):
    def test_identity_batch_norm(self):
        x = randn(np.random.default_rng(1), (3, 4, 4), 1.0, F64)
        out = ops.batch_norm_eval(x, BatchNormParams.identity(3, F64))
        np.testing.assert_array_equal(out.array, x.array)

    def test_batch_norm_formula(self):
        x = Tensor(np.full((1, 2, 2), 3.0), F64)
        p = BatchNormParams(Tensor([2.0], F64), Tensor([0.5], F64), Tensor([1.0], F64), Tensor([4.0], F64), 0.0)
        np.testing.assert_allclose(ops.batch_norm_eval(x, p).array, np.full((1, 2, 2), 2.5))

    def test_layer_norm_statistics(self):
        x = randn(np.random.default_rng(2), (5, 16), 3.0, F64)
        out = ops.layer_norm(x, LayerNormParams(ones((16,), F64), zeros((16,), F64))).array
        np.testing.assert_allclose(out.mean(axis=-1), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.var(axis=-1), 1.0, atol=1e-4)

    def test_layer_norm_feature_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            ops.layer_norm(zeros((2, 3)), LayerNormParams(ones((4,)), zeros((4,))))


class ActivationTests(unittest.TestCase):
    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=12))
    def test_softmax_rows_sum_to_one(self, values):
        probs = ops.softmax(Tensor([values], F64)).array
        self.assertAlmostEqual(float(probs.sum()), 1.0, places=12)
        self.assertTrue((probs >= 0).all())

    def test_softmax_is_shift_invariant(self):
        x = Tensor([[1.0, 2.0, 3.0]], F64)
        shifted = Tensor([[1001.0, 1002.0, 1003.0]], F64)
        np.testing.assert_allclose(ops.softmax(x).array, ops.softmax(shifted).array, atol=1e-12)

    def test_gelu_values(self):
        out = ops.gelu(Tensor([0.0, 1.0, -1.0], F64)).array
        np.testing.assert_allclose(out, [0.0, 0.8413447460685429, -0.15865525393145707], atol=1e-12)

    def test_sigmoid_and_relu(self):
        np.testing.assert_allclose(ops.sigmoid(Tensor([0.0], F64)).array, [0.5])
        np.testing.assert_array_equal(ops.relu(Tensor([-1.0, 2.0], F64)).array, [0.0, 2.0])


class LayoutTests(unittest.TestCase):
    def test_reshape_permute_slice(self):
        x = Tensor(np.arange(24.0).reshape(2, 3, 4), F64)
        self.assertEqual(ops.permute(x, (2, 0, 1)).shape, (4, 2, 3))
        self.assertEqual(ops.reshape(x, (6, 4)).shape, (6, 4))
        np.testing.assert_array_equal(ops.slice_axis(x, 2, 1, 3).array, x.array[:, :, 1:3])
        with self.assertRaises(DimensionMismatch):
            ops.reshape(x, (5, 5))
        with self.assertRaises(DimensionMismatch):
            ops.permute(x, (0, 0, 1))

    def test_gather_and_select(self):
        table = Tensor(np.arange(6.0).reshape(3, 2), F64)
        np.testing.assert_array_equal(ops.gather_rows(table, [2, 0]).array, [[4.0, 5.0], [0.0, 1.0]])
        self.assertEqual(ops.select(Tensor([7.0, 8.0], F64), 1).item(), 8.0)
        with self.assertRaises(DimensionMismatch):
            ops.gather_rows(table, [3])

    def test_mean_over_axes(self):
        x = Tensor(np.arange(12.0).reshape(3, 4), F64)
        np.testing.assert_allclose(ops.mean(x, axis=0).array, x.array.mean(axis=0))
        self.assertAlmostEqual(ops.mean(x).item(), 5.5)
        with self.assertRaises(DimensionMismatch):
            ops.mean(zeros((0, 3)), axis=0)

    def test_stack_requires_equal_shapes(self):
        with self.assertRaises(DimensionMismatch):
            ops.stack([zeros((2,)), zeros((3,))])


class LossTests(unittest.TestCase):
    def test_bce_at_one_half(self):
        loss = ops.bce_loss(Tensor([[0.5, 0.5]], F64), Tensor([[1.0, 0.0]], F64))
        self.assertAlmostEqual(loss.item(), math.log(2.0), places=12)

    def test_reductions_to_one_value_are_scalars(self):
        x = Tensor([[0.25, 0.75]], F64)
        self.assertEqual(ops.bce_loss(x, Tensor([[1.0, 0.0]], F64)).shape, ())
        self.assertEqual(ops.mean(x).shape, ())
        self.assertEqual(ops.select(Tensor([7.0, 8.0], F64), 0).shape, ())

    def test_bce_clamps_certain_mistakes(self):
        loss = ops.bce_loss(Tensor([[0.0]], F64), Tensor([[1.0]], F64))
        self.assertAlmostEqual(loss.item(), -math.log(ops.BCE_CLAMP), places=6)


if __name__ == "__main__":
    unittest.main()
