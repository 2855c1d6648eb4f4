"""Wall-time and size comparison of multi-branch vs fused inference and integrated vs pre-mode pipelines."""

import json
import time
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from src.errors import ArchitectureMismatch
from src.model.network import V2EMModel
from src.pipeline.assets import VideoAssets
from src.pipeline.runner import run_video
from src.tensor.tensor import uniform
from src.vision.repvgg import blocks_from_state, count_flops, count_params, frame_features


@dataclass(frozen=True)
class Timing:
    median: float
    p10: float
    p90: float
    runs: int

    @classmethod
    def of(cls, samples: list[float]) -> "Timing":
        values = np.asarray(samples)
        return cls(float(np.median(values)), float(np.percentile(values, 10)),
                   float(np.percentile(values, 90)), len(samples))


def speedup(slow: Timing, fast: Timing) -> float:
    """(t_slow - t_fast) / t_slow from medians."""
    return (slow.median - fast.median) / slow.median if slow.median > 0 else 0.0


def time_runs(fns: Sequence[Callable[[], object]], iters: int, warmup: int) -> list[Timing]:
    """Time the callables round-robin so slow drift of the machine hits each of them alike."""
    for _ in range(warmup):
        for fn in fns:
            fn()
    samples: list[list[float]] = [[] for _ in fns]
    for _ in range(iters):
        for fn, bucket in zip(fns, samples):
            start = time.perf_counter()
            fn()
            bucket.append(time.perf_counter() - start)
    return [Timing.of(bucket) for bucket in samples]


@dataclass
class BenchReport:
    train: Timing
    fused: Timing
    vision_speedup: float
    train_flops: int
    fused_flops: int
    train_vision_params: int
    fused_vision_params: int
    train_params: dict
    fused_params: dict
    integrated: Timing | None = None
    pre: Timing | None = None
    pipeline_speedup: float | None = None
    predictions_identical: bool | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        lines = [
            f"vision train  median {self.train.median * 1e3:9.3f} ms  (p10 {self.train.p10 * 1e3:.3f}, "
            f"p90 {self.train.p90 * 1e3:.3f})  FLOPs/frame {self.train_flops}  params {self.train_vision_params}",
            f"vision fused  median {self.fused.median * 1e3:9.3f} ms  (p10 {self.fused.p10 * 1e3:.3f}, "
            f"p90 {self.fused.p90 * 1e3:.3f})  FLOPs/frame {self.fused_flops}  params {self.fused_vision_params}",
            f"vision speedup {self.vision_speedup * 100:.2f}%",
        ]
        if self.integrated is not None and self.pre is not None:
            lines += [
                f"pipeline integrated median {self.integrated.median:.4f} s",
                f"pipeline pre-mode   median {self.pre.median:.4f} s",
                f"pipeline speedup {self.pipeline_speedup * 100:.2f}%  identical predictions: "
                f"{self.predictions_identical}",
            ]
        lines.append("params by modality (train / fused): " + ", ".join(
            f"{k} {self.train_params[k]} / {self.fused_params[k]}" for k in self.train_params))
        return "\n".join(lines)


def check_pair(train_model: V2EMModel, fused_model: V2EMModel):
    if train_model.mode != "train" or fused_model.mode != "fused":
        raise ArchitectureMismatch(f"expected a train and a fused checkpoint, got {train_model.mode} "
                                   f"and {fused_model.mode}")
    if train_model.config.to_dict() != fused_model.config.to_dict():
        raise ArchitectureMismatch("the two checkpoints were built from different configurations")


def bench_vision(train_model: V2EMModel, fused_model: V2EMModel, batch: int, iters: int, warmup: int,
                 seed: int = 0) -> tuple[Timing, Timing]:
    cfg = train_model.config
    rng = np.random.default_rng(seed)
    frames = [uniform(rng, (cfg.vision.in_channels, cfg.vision.side, cfg.vision.side), 0.0, 1.0,
                      cfg.tensor_dtype) for _ in range(batch)]
    train_blocks = blocks_from_state(train_model.state, cfg.vision, "train")
    fused_blocks = blocks_from_state(fused_model.state, cfg.vision, "fused")
    train, fused = time_runs([lambda: frame_features(frames, train_blocks),
                              lambda: frame_features(frames, fused_blocks)], iters, warmup)
    return train, fused


def bench_pipeline(model: V2EMModel, assets: VideoAssets, iters: int, seg_seconds: float = 5.0):
    """Single-threaded integrated vs pre-mode timings plus the equality of their predictions."""
    outputs = {}

    def run(mode: str):
        outputs[mode] = run_video(assets, model, seg_seconds, mode, workers=1).records()

    integrated, pre = time_runs([lambda: run("integrated"), lambda: run("pre")], iters, 1)
    return integrated, pre, outputs["integrated"] == outputs["pre"]


def run_bench(train_model: V2EMModel, fused_model: V2EMModel, batch: int = 8, iters: int = 30, warmup: int = 5,
              assets: VideoAssets | None = None, pipeline_iters: int = 10, seed: int = 0) -> BenchReport:
    check_pair(train_model, fused_model)
    vision_cfg = train_model.config.vision
    train, fused = bench_vision(train_model, fused_model, batch, iters, warmup, seed)
    report = BenchReport(
        train=train, fused=fused, vision_speedup=speedup(train, fused),
        train_flops=count_flops(vision_cfg, "train").total, fused_flops=count_flops(vision_cfg, "fused").total,
        train_vision_params=count_params(vision_cfg, "train").total,
        fused_vision_params=count_params(vision_cfg, "fused").total,
        train_params=train_model.parameter_counts(), fused_params=fused_model.parameter_counts(),
    )
    if assets is not None:
        report.integrated, report.pre, report.predictions_identical = bench_pipeline(fused_model, assets,
                                                                                     pipeline_iters)
        report.pipeline_speedup = speedup(report.pre, report.integrated)
    return report
