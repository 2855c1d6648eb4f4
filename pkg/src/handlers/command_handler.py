"""Command handling module."""

import argparse
import dataclasses
import os

import numpy as np

from src.bench.gradients import run_suite
from src.bench.harness import run_bench
from src.config import _, logger
from src.errors import EXIT_INPUT, EXIT_INVARIANT, EXIT_OK, FV2ESError, LengthMismatch, ReportError
from src.metrics import evaluate
from src.model.checkpoint import load_checkpoint, save_checkpoint
from src.model.config import load_config
from src.model.network import V2EMModel
from src.pipeline.assets import load_assets, load_assets_dir
from src.pipeline.runner import run_video, write_predictions
from src.pipeline.segments import prepare_inputs, segment_timeline
from src.pipeline.store import SegmentStore
from src.spectrum.export import export_attention
from src.tensor.tensor import uniform
from src.training.synthetic import synthetic_assets
from src.training.trainer import TOY_LR, TrainSettings, train_toy, write_training_outputs
from src.utils.helpers import label_rows, read_json, write_json, write_text
from src.vision.repvgg import blocks_from_state, count_params, frame_features

MANIFEST_FILE = "manifest.json"
STORE_DIR = "segments"
PROBES = 10


class CommandHandler:
    """Runs one parsed sub-command and turns its outcome into an exit code."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.commands = {
            "preprocess": self.preprocess,
            "train-toy": self.train_toy,
            "reparam": self.reparam,
            "infer": self.infer,
            "bench": self.bench,
            "eval": self.eval,
            "gradcheck": self.gradcheck,
        }

    def handle(self) -> int:
        command = self.commands.get(self.args.command)
        if command is None:
            logger.error(_("Unknown command: {}").format(self.args.command))
            return EXIT_INPUT
        try:
            return command()
        except FV2ESError as error:
            logger.error(_("{}: {}").format(type(error).__name__, error))
            return error.exit_code
        except FileNotFoundError as error:
            logger.error(_("File not found: {}").format(error.filename or error))
            return EXIT_INPUT
        except Exception as error:
            logger.exception(_("Internal error: {}").format(error))
            return EXIT_INVARIANT

    def preprocess(self) -> int:
        """Segment the assets and write the segment manifest."""
        args = self.args
        config = load_config(args.config)
        assets = load_assets(args.audio, args.frames, args.transcript, config)
        segments = segment_timeline(assets, args.segment_seconds, config.text.vocab_size)
        manifest = {
            "segment_seconds": args.segment_seconds,
            "duration": assets.duration,
            "segments": [{
                "index": s.index,
                "t0": s.t0,
                "t1": s.t1,
                "frames": [f.timestamp_s for f in s.frames],
                "audio_range": list(s.audio_range),
                "tokens": list(s.tokens.tokens),
            } for s in segments],
        }
        write_json(os.path.join(args.out, MANIFEST_FILE), manifest)
        if args.materialize:
            with SegmentStore(os.path.join(args.out, STORE_DIR)) as store:
                for segment in segments:
                    store.put(segment.index, prepare_inputs(segment, config))
        logger.info(_("Preprocessed {} segments into {}").format(len(segments), args.out))
        return EXIT_OK

    def train_toy(self) -> int:
        args = self.args
        config = load_config(args.config)
        if args.replication:
            settings = TrainSettings.replication()
            if args.lr is not None:
                settings = dataclasses.replace(settings, lr=args.lr)
        else:
            settings = TrainSettings(steps=args.steps, batch=args.batch, lr=args.lr or TOY_LR,
                                     eval_every=args.eval_every)
        result = train_toy(config, args.seed, settings)
        write_training_outputs(result, args.out)
        if result.losses:
            logger.info(_("Loss {:.4f} -> {:.4f} over {} steps").format(
                result.losses[0], result.losses[-1], len(result.losses)))
        return EXIT_OK

    def reparam(self) -> int:
        """Fuse the visual stack and report the equivalence residual on random probes."""
        args = self.args
        model = load_checkpoint(args.model)
        fused = model.fused()
        save_checkpoint(fused, args.out)
        residual = probe_residual(model, fused, args.seed)
        cfg = model.config.vision
        print(f"equivalence residual (max |train - fused| over {PROBES} probes): {residual:.3e}")
        print(f"vision params: train {count_params(cfg, 'train').total}, fused {count_params(cfg, 'fused').total}")
        return EXIT_OK

    def infer(self) -> int:
        args = self.args
        model = load_checkpoint(args.model)
        assets = load_assets_dir(args.input, model.config)
        result = run_video(assets, model, args.segment_seconds, args.mode)
        write_predictions(args.out, result)
        if args.attention_dir:
            first = segment_timeline(assets, args.segment_seconds, model.config.text.vocab_size)[0]
            inputs = prepare_inputs(first, model.config)
            if inputs.spectra:
                export_attention(model.attention_maps(inputs.spectra[0]), args.attention_dir)
            else:
                logger.warning(_("The first segment has no audio window; no attention maps exported"))
        return EXIT_OK

    def bench(self) -> int:
        args = self.args
        train_model = load_checkpoint(args.train_model)
        fused_model = load_checkpoint(args.fused_model)
        assets = synthetic_assets(np.random.default_rng(args.seed), fused_model.config, args.asset_seconds)
        report = run_bench(train_model, fused_model, args.batch, args.iters, args.warmup, assets,
                           args.pipeline_iters, args.seed)
        print(report.to_text())
        if args.out:
            write_json(args.out, report.to_dict())
        return EXIT_OK

    def eval(self) -> int:
        args = self.args
        preds = label_rows(read_json(args.preds), args.preds)
        truth = label_rows(read_json(args.labels), args.labels)
        if len(preds) != len(truth):
            raise LengthMismatch(f"{len(preds)} predicted segments for {len(truth)} labelled segments")
        if preds.keys() != truth.keys():
            raise ReportError("predictions and labels cover different segments")
        order = sorted(truth)
        report = evaluate([preds[i] for i in order], [truth[i] for i in order])
        if report.degenerate:
            logger.warning(_("Degenerate classes excluded from macro W_Acc: {}").format(", ".join(report.degenerate)))
        print(report.to_text())
        if args.out:
            write_json(args.out + ".json", report.to_dict())
            write_text(args.out + ".txt", report.to_text())
        return EXIT_OK

    def gradcheck(self) -> int:
        reports = run_suite(self.args.seed, self.args.inject_bug)
        for report in reports:
            print(report.summary())
        failed = [report.name for report in reports if not report.passed]
        if failed:
            logger.error(_("Gradient check failed for: {}").format(", ".join(failed)))
            return EXIT_INVARIANT
        logger.info(_("All {} gradient checks passed").format(len(reports)))
        return EXIT_OK


def probe_residual(model: V2EMModel, fused: V2EMModel, seed: int, probes: int = PROBES) -> float:
    """Largest absolute difference between multi-branch and fused visual features on random frames."""
    cfg = model.config.vision
    rng = np.random.default_rng(seed)
    frames = [uniform(rng, (cfg.in_channels, cfg.side, cfg.side), 0.0, 1.0, model.config.tensor_dtype)
              for _ in range(probes)]
    train = frame_features(frames, blocks_from_state(model.state, cfg, "train"))
    single = frame_features(frames, blocks_from_state(fused.state, cfg, "fused"))
    return float(np.abs(train.array.astype(np.float64) - single.array.astype(np.float64)).max())
