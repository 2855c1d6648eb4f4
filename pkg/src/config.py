"""Configuration module for FV2ES."""

import argparse
import gettext
import logging
import os


def positive_int(value: str) -> int:
    """Parse a strictly positive integer command-line value."""
    try:
        parsed = int(value)
    except ValueError as error:
        raise argparse.ArgumentTypeError("must be an integer") from error
    if parsed <= 0:
        raise argparse.ArgumentTypeError("must be greater than zero")
    return parsed


def non_negative_int(value: str) -> int:
    """Parse an integer command-line value that may be zero."""
    try:
        parsed = int(value)
    except ValueError as error:
        raise argparse.ArgumentTypeError("must be an integer") from error
    if parsed < 0:
        raise argparse.ArgumentTypeError("must not be negative")
    return parsed


def positive_float(value: str) -> float:
    """Parse a strictly positive floating-point command-line value."""
    try:
        parsed = float(value)
    except ValueError as error:
        raise argparse.ArgumentTypeError("must be a number") from error
    if parsed <= 0:
        raise argparse.ArgumentTypeError("must be greater than zero")
    return parsed


parser = argparse.ArgumentParser(
    description="FV2ES - multimodal video-to-emotion inference and toy training")
parser.add_argument("--language", type=str, default="en_US", help="Language",
                    choices=["en_US", "zh_CN"])
commands = parser.add_subparsers(dest="command")

preprocess_parser = commands.add_parser("preprocess", help="Segment assets on the timeline")
preprocess_parser.add_argument("--audio", type=str, default="", help="Mono or stereo 16-bit PCM WAV")
preprocess_parser.add_argument("--frames", type=str, default="",
                               help="Directory of frame_<ms>.png|ppm images")
preprocess_parser.add_argument("--transcript", type=str, default="", help="Transcript JSON-lines file")
preprocess_parser.add_argument("--segment-seconds", type=positive_float, default=5.0,
                               help="Segment length in seconds (default: 5)")
preprocess_parser.add_argument("--config", type=str, default="default",
                               help="Model config JSON file or preset name (default: default)")
preprocess_parser.add_argument("--materialize", action="store_true",
                               help="Also store preprocessed segment inputs (pre-mode assets)")
preprocess_parser.add_argument("--out", type=str, required=True, help="Output directory")

train_parser = commands.add_parser("train-toy", help="Train on the synthetic multimodal generator")
train_parser.add_argument("--config", type=str, default="toy",
                          help="Model config JSON file or preset name (default: toy)")
train_parser.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
train_parser.add_argument("--steps", type=non_negative_int, default=200,
                          help="Optimizer steps (default: 200)")
train_parser.add_argument("--batch", type=positive_int, default=8, help="Batch size (default: 8)")
train_parser.add_argument("--lr", type=positive_float, default=None,
                          help="Learning rate (default: 1e-3, or 4.5e-6 with --replication)")
train_parser.add_argument("--eval-every", type=non_negative_int, default=50,
                          help="Held-out evaluation interval in steps, 0 disables (default: 50)")
train_parser.add_argument("--replication", action="store_true",
                          help="Use the replication hyperparameters (lr 4.5e-6, 30 epochs, batch 8)")
train_parser.add_argument("--out", type=str, required=True, help="Checkpoint output directory")

reparam_parser = commands.add_parser("reparam", help="Fuse a train-mode checkpoint into single-branch form")
reparam_parser.add_argument("--model", type=str, required=True, help="Train-mode checkpoint directory")
reparam_parser.add_argument("--out", type=str, required=True, help="Fused checkpoint directory")
reparam_parser.add_argument("--seed", type=int, default=0, help="Random seed for probes (default: 0)")

infer_parser = commands.add_parser("infer", help="Predict emotions for an asset directory")
infer_parser.add_argument("--model", type=str, required=True, help="Checkpoint directory")
infer_parser.add_argument("--input", type=str, required=True,
                          help="Asset directory with audio.wav, frames/ and transcript.jsonl")
infer_parser.add_argument("--out", type=str, required=True, help="Predictions JSON path")
infer_parser.add_argument("--mode", choices=["integrated", "pre"], default="integrated",
                          help="Integrated in-memory processing or store-and-reload (default: integrated)")
infer_parser.add_argument("--segment-seconds", type=positive_float, default=5.0,
                          help="Segment length in seconds (default: 5)")
infer_parser.add_argument("--attention-dir", type=str, default="",
                          help="Export attention maps of the first acoustic window here")

bench_parser = commands.add_parser("bench", help="Time multi-branch vs fused and integrated vs pre-mode")
bench_parser.add_argument("--train-model", type=str, required=True, help="Train-mode checkpoint")
bench_parser.add_argument("--fused-model", type=str, required=True, help="Fused checkpoint")
bench_parser.add_argument("--batch", type=positive_int, default=8, help="Frames per forward (default: 8)")
bench_parser.add_argument("--iters", type=positive_int, default=30, help="Timed iterations (default: 30)")
bench_parser.add_argument("--warmup", type=non_negative_int, default=5, help="Warmup iterations (default: 5)")
bench_parser.add_argument("--pipeline-iters", type=positive_int, default=10,
                          help="Timed pipeline runs per mode (default: 10)")
bench_parser.add_argument("--asset-seconds", type=positive_float, default=60.0,
                          help="Synthetic asset length for the pipeline comparison (default: 60)")
bench_parser.add_argument("--out", type=str, default="", help="Optional BenchReport JSON path")
bench_parser.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")

eval_parser = commands.add_parser("eval", help="Score predictions against labels")
eval_parser.add_argument("--preds", type=str, required=True, help="Predictions JSON")
eval_parser.add_argument("--labels", type=str, required=True, help="Labels JSON")
eval_parser.add_argument("--out", type=str, default="", help="Report path prefix (.json and .txt)")

gradcheck_parser = commands.add_parser("gradcheck", help="Run the finite-difference gradient suite")
gradcheck_parser.add_argument("--inject-bug", action="store_true",
                              help="Corrupt analytic gradients to self-test the harness")
gradcheck_parser.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")

args = parser.parse_args()

logger = logging.getLogger()
logger.setLevel("INFO")
BASIC_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
formatter = logging.Formatter(BASIC_FORMAT, DATE_FORMAT)
chlr = logging.StreamHandler()
chlr.setFormatter(formatter)
logger.addHandler(chlr)

project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
locale_dir = os.path.join(project_root, "locale")
gettext.bindtextdomain("FV2ES", locale_dir)
gettext.textdomain("FV2ES")
try:
    _ = gettext.translation("FV2ES", locale_dir, languages=[args.language]).gettext
except FileNotFoundError:
    _ = gettext.gettext


def worker_count() -> int:
    """Worker threads allowed by FV2ES_THREADS (default 1)."""
    raw = os.environ.get("FV2ES_THREADS", "")
    if not raw:
        return 1
    try:
        return positive_int(raw)
    except argparse.ArgumentTypeError:
        logger.warning(_("Ignoring invalid FV2ES_THREADS value: {}").format(raw))
        return 1
