"""Built-in gradient check suite: every differentiable primitive, each model component and the whole tiny model."""

from typing import Callable

import numpy as np

from src.autodiff.gradcheck import GradcheckReport, gradcheck
from src.fusion.head import fuse_and_predict
from src.model.config import PRESETS
from src.model.network import V2EMModel
from src.spectrum.tower import SpectrumTowerConfig, aggregate, forward_tower, init_tower, partition_patches, \
    transformer_layer
from src.tensor.attention import AttentionParams, init_attention, multi_head_attention
from src.tensor.tensor import BatchNormParams, DType, LayerNormParams, Tensor, randn, uniform
from src.text.encoder import TextEncoderConfig, encode_text, HashedTextEncoder
from src.text.tokenizer import TokenSequence
from src.training.synthetic import make_dataset
from src.vision.repvgg import LayerSpec, TrainBlockParams, VisionNetConfig, block_forward_train, init_vision, \
    is_buffer

F64 = DType.F64
MODEL_SAMPLES = 2


def _weighted(ops, out, weights: Tensor):
    """A scalar that depends on every output entry with distinct weights."""
    return ops.mean(ops.mul(out, weights))


def _case(name: str, rng: np.random.Generator, inputs: dict[str, Tensor], body: Callable, out_shape,
          max_elements: int | None = None):
    weights = randn(rng, out_shape, 1.0, F64)
    return name, (lambda ops, v: _weighted(ops, body(ops, v), weights)), inputs, max_elements


def primitive_cases(rng: np.random.Generator) -> list:
    r = lambda *shape: randn(rng, shape, 1.0, F64)
    stats_mean, stats_var = r(3), uniform(rng, (3,), 0.5, 1.5, F64)
    return [
        _case("matmul", rng, {"a": r(3, 4), "b": r(4, 2)}, lambda ops, v: ops.matmul(v["a"], v["b"]), (3, 2)),
        _case("add", rng, {"a": r(3, 4), "b": r(3, 4)}, lambda ops, v: ops.add(v["a"], v["b"]), (3, 4)),
        _case("mul", rng, {"a": r(3, 4), "b": r(3, 4)}, lambda ops, v: ops.mul(v["a"], v["b"]), (3, 4)),
        _case("scale", rng, {"a": r(3, 4)}, lambda ops, v: ops.scale(v["a"], 0.37), (3, 4)),
        _case("add_bias", rng, {"a": r(3, 4), "b": r(4)}, lambda ops, v: ops.add_bias(v["a"], v["b"]), (3, 4)),
        _case("mul_scalar", rng, {"a": r(3, 4), "s": r()}, lambda ops, v: ops.mul_scalar(v["a"], v["s"]), (3, 4)),
        _case("conv2d", rng, {"x": r(2, 5, 5), "k": r(3, 2, 3, 3), "b": r(3)},
              lambda ops, v: ops.conv2d(v["x"], v["k"], v["b"], stride=2, pad=1), (3, 3, 3)),
        _case("conv2d_1x1", rng, {"x": r(2, 4, 4), "k": r(3, 2, 1, 1)},
              lambda ops, v: ops.conv2d(v["x"], v["k"], None, stride=1, pad=0), (3, 4, 4)),
        _case("maxpool2d", rng, {"x": r(2, 5, 5)}, lambda ops, v: ops.maxpool2d(v["x"], 3, 2, 1), (2, 3, 3)),
        _case("batch_norm", rng, {"x": r(3, 4, 4), "gamma": r(3), "beta": r(3)},
              lambda ops, v: ops.batch_norm(v["x"], BatchNormParams(v["gamma"], v["beta"], stats_mean, stats_var)),
              (3, 4, 4)),
        _case("layer_norm", rng, {"x": r(3, 5), "gamma": r(5), "beta": r(5)},
              lambda ops, v: ops.layer_norm(v["x"], LayerNormParams(v["gamma"], v["beta"])), (3, 5)),
        _case("gelu", rng, {"x": r(3, 4)}, lambda ops, v: ops.gelu(v["x"]), (3, 4)),
        _case("relu", rng, {"x": r(3, 4)}, lambda ops, v: ops.relu(v["x"]), (3, 4)),
        _case("sigmoid", rng, {"x": r(3, 4)}, lambda ops, v: ops.sigmoid(v["x"]), (3, 4)),
        _case("softmax", rng, {"x": r(3, 4)}, lambda ops, v: ops.softmax(v["x"]), (3, 4)),
        _case("mean", rng, {"x": r(3, 4, 2)}, lambda ops, v: ops.mean(v["x"], axis=(0, 2)), (4,)),
        _case("reshape_permute", rng, {"x": r(2, 3, 4)},
              lambda ops, v: ops.permute(ops.reshape(v["x"], (4, 3, 2)), (2, 0, 1)), (2, 4, 3)),
        _case("concat", rng, {"a": r(2, 3), "b": r(2, 1)}, lambda ops, v: ops.concat([v["a"], v["b"]], axis=1),
              (2, 4)),
        _case("stack", rng, {"a": r(3), "b": r(3)}, lambda ops, v: ops.stack([v["a"], v["b"]]), (2, 3)),
        _case("slice_axis", rng, {"x": r(3, 5)}, lambda ops, v: ops.slice_axis(v["x"], 1, 1, 4), (3, 3)),
        _case("gather_rows", rng, {"t": r(5, 3)}, lambda ops, v: ops.gather_rows(v["t"], [4, 0, 4]), (3, 3)),
        _case("select", rng, {"x": r(4)}, lambda ops, v: ops.reshape(ops.select(v["x"], 2), (1,)), (1,)),
        ("bce_loss", _bce_fn(rng), {"x": r(3, 6)}, None),
    ]


def _bce_fn(rng: np.random.Generator):
    labels = Tensor.wrap(rng.integers(0, 2, (3, 6)), F64)
    return lambda ops, v: ops.bce_loss(ops.sigmoid(v["x"]), labels)


def component_cases(rng: np.random.Generator) -> list:
    cases = []
    d, heads = 8, 2
    tokens = randn(rng, (4, d), 1.0, F64)
    attention = init_attention(rng, "attn", d, F64)
    cases.append(_case("attention", rng, {"x": tokens, **attention},
                       lambda ops, v: multi_head_attention(v["x"], AttentionParams.from_state(v, "attn"), heads, ops)[0],
                       (4, d)))
    norm = {"gamma": uniform(rng, (d,), 0.5, 1.5, F64), "beta": randn(rng, (d,), 0.1, F64)}
    cases.append(_case("transformer_layer", rng, {"x": tokens, **attention, **norm},
                       lambda ops, v: transformer_layer(v["x"], AttentionParams.from_state(v, "attn"),
                                                        LayerNormParams(v["gamma"], v["beta"]), heads, ops)[0],
                       (4, d)))

    tower_cfg = SpectrumTowerConfig(side=8, d=4, heads=1, sub=2)
    tower = init_tower(rng, tower_cfg, F64)
    spectrum = randn(rng, (8, 8), 1.0, F64)
    cases.append(_case("aggregate", rng, dict(tower),
                       lambda ops, v: ops.stack(aggregate(partition_patches(spectrum, tower_cfg, v, ops),
                                                          tower_cfg, v, ops).blocks), (4, 4, 4), max_elements=4))
    cases.append(_case("tower", rng, dict(tower),
                       lambda ops, v: forward_tower(spectrum, tower_cfg, v, ops)[0], (4,), max_elements=4))

    spec = LayerSpec(3, 3, 1)
    block = {k: t for k, t in init_vision(rng, VisionNetConfig((spec,) * 6, side=5), F64, random_stats=True).items()
             if k.startswith("vision.block0.")}
    stats = {k: t for k, t in block.items() if is_buffer(k)}
    frame = randn(rng, (3, 5, 5), 1.0, F64)
    cases.append(_case("vision_block", rng, {k: t for k, t in block.items() if not is_buffer(k)},
                       lambda ops, v: block_forward_train(frame, TrainBlockParams.from_state({**stats, **v}, 0, spec),
                                                          ops), (3, 5, 5)))

    text_cfg = TextEncoderConfig(vocab_size=16, d_t=8, layers=1, heads=2, max_len=8)
    text_state = HashedTextEncoder(text_cfg).init_params(rng, F64)
    seq = TokenSequence((3, 11, 3))
    cases.append(_case("text_encoder", rng, text_state, lambda ops, v: encode_text(seq, text_cfg, v, ops),
                       (3, 8), max_elements=6))
    return cases


def model_cases(rng: np.random.Generator, seed: int) -> list:
    config = PRESETS["tiny"].with_dtype("f64")
    model = V2EMModel.initialize(config, seed, random_stats=True)
    samples = make_dataset(np.random.default_rng([seed, 7]), config, MODEL_SAMPLES)
    buffers = {k: t for k, t in model.state.items() if k not in model.trainable()}
    trainable = {k: t for k, t in model.state.items() if k in model.trainable()}
    labels = Tensor([s.labels for s in samples], F64)

    fusion_params = {k: t for k, t in trainable.items() if k.startswith("fusion.")}
    features = model.features(samples[0].inputs.astype(F64), model.state)
    fusion_weights = randn(rng, (model.emotions,), 1.0, F64)

    def fusion_fn(ops, v):
        return _weighted(ops, fuse_and_predict(features, config.fusion, v, ops)[0], fusion_weights)

    def model_fn(ops, v):
        params = {**buffers, **v}
        probs = [model.segment_logits(s.inputs, params, ops)[1] for s in samples]
        return ops.bce_loss(ops.stack(probs), labels)

    return [("fusion_head", fusion_fn, fusion_params, 3),
            ("tiny_model", model_fn, trainable, 3)]


def run_suite(seed: int = 0, inject_bug: bool = False) -> list[GradcheckReport]:
    rng = np.random.default_rng(seed)
    cases = primitive_cases(rng) + component_cases(rng) + model_cases(rng, seed)
    return [gradcheck(fn, inputs, name, max_elements=max_elements, seed=seed, inject_bug=inject_bug)
            for name, fn, inputs, max_elements in cases]
