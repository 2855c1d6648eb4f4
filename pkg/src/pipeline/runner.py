"""Segment-level inference and video-level aggregation."""

import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from src.config import _, logger, worker_count
from src.errors import EmptyList
from src.fusion.head import EmotionScores, predict_labels
from src.model.network import V2EMModel
from src.pipeline.assets import VideoAssets
from src.pipeline.segments import Segment, prepare_inputs, segment_timeline
from src.pipeline.store import SegmentStore

RUN_MODES = ("integrated", "pre")


@dataclass
class SegmentResult:
    index: int
    t0: float
    t1: float
    scores: EmotionScores


@dataclass
class VideoResult:
    video: EmotionScores
    segments: list[SegmentResult]

    def records(self, threshold: float = 0.5) -> list[dict]:
        rows = [{"segment_index": s.index, "t0": s.t0, "t1": s.t1, "probs": list(s.scores.probs),
                 "labels": list(predict_labels(s.scores, threshold))} for s in self.segments]
        rows.append({"scope": "video", "label_set": self.video.label_set, "probs": list(self.video.probs),
                     "labels": list(predict_labels(self.video, threshold))})
        return rows


def run_segment(segment: Segment, model: V2EMModel) -> EmotionScores:
    """Preprocess and predict one segment entirely in memory."""
    return model.predict(prepare_inputs(segment, model.config))


def aggregate_video(per_segment: list[EmotionScores]) -> EmotionScores:
    """Per-class mean of segment probabilities."""
    if not per_segment:
        raise EmptyList("no segment scores to aggregate")
    probs = np.mean([s.probs for s in per_segment], axis=0)
    return EmotionScores(tuple(float(p) for p in probs), per_segment[0].label_set)


def _map(fn, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="SegmentWorker") as pool:
        return list(pool.map(fn, items))


def _run_pre_mode(segments: list[Segment], model: V2EMModel, store_dir: str, workers: int) -> list[EmotionScores]:
    """Preprocess every segment to artifact files, then re-read and decode them all before inference."""
    with SegmentStore(store_dir) as store:
        for segment in segments:
            store.put(segment.index, prepare_inputs(segment, model.config))
        stored = [store.get(segment.index) for segment in segments]
    return _map(model.predict, stored, workers)


def run_video(assets: VideoAssets, model: V2EMModel, seg_seconds: float = 5.0, mode: str = "integrated",
              store_dir: str | None = None, workers: int | None = None) -> VideoResult:
    """Segment, predict every segment and average.

    "integrated" feeds each segment's in-memory inputs straight to the model.
    "pre" writes each segment's mel windows, frames and tokens to files and
    decodes them again before inference; predictions are identical.
    """
    if mode not in RUN_MODES:
        raise ValueError(f"mode must be one of {RUN_MODES}, got {mode!r}")
    workers = worker_count() if workers is None else workers
    segments = segment_timeline(assets, seg_seconds, model.config.text.vocab_size)
    if mode == "integrated":
        scores = _map(lambda segment: run_segment(segment, model), segments, workers)
    elif store_dir is None:
        with tempfile.TemporaryDirectory(prefix="fv2es-pre-") as tmp:
            scores = _run_pre_mode(segments, model, tmp, workers)
    else:
        scores = _run_pre_mode(segments, model, store_dir, workers)
    results = [SegmentResult(s.index, s.t0, s.t1, sc) for s, sc in zip(segments, scores)]
    return VideoResult(aggregate_video(scores), results)


def write_predictions(path: str, result: VideoResult):
    directory = os.path.dirname(path)
    if directory and not os.path.exists(directory):
        os.makedirs(directory)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(result.records(), f, indent=2)
        f.write("\n")
    logger.info(_("Wrote predictions for {} segments to {}").format(len(result.segments), path))
