"""Toy end-to-end training on synthetic samples."""

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from src.autodiff.graph import Graph
from src.autodiff.optim import AdamState, adam_step
from src.config import _, logger
from src.fusion.head import predict_labels, scores_from_probs
from src.metrics import EvalReport, HistorySummary, evaluate, summarize_history
from src.model.checkpoint import save_checkpoint
from src.model.config import ModelConfig
from src.model.network import V2EMModel
from src.tensor.tensor import Tensor
from src.training.synthetic import Sample, make_dataset

TOY_LR = 1e-3
TRAIN_SIZE = 256
EVAL_SIZE = 64


@dataclass(frozen=True)
class TrainSettings:
    steps: int = 200
    batch: int = 8
    lr: float = TOY_LR
    eval_every: int = 50
    train_size: int = TRAIN_SIZE
    eval_size: int = EVAL_SIZE

    @classmethod
    def replication(cls, train_size: int = TRAIN_SIZE) -> "TrainSettings":
        """lr 4.5e-6, 30 epochs, batch 8."""
        batch = 8
        return cls(steps=30 * math.ceil(train_size / batch), batch=batch, lr=4.5e-6,
                   eval_every=math.ceil(train_size / batch), train_size=train_size)


@dataclass
class TrainResult:
    model: V2EMModel
    losses: list[float] = field(default_factory=list)
    history: list[tuple[int, EvalReport]] = field(default_factory=list)

    @property
    def summary(self) -> HistorySummary:
        return summarize_history([report for _, report in self.history])


def batch_loss(model: V2EMModel, samples: list[Sample]):
    """Record the forward of a batch on a fresh graph; returns (graph, loss node)."""
    graph = Graph()
    params = graph.parameters(model.state, model.trainable())
    probs = [model.segment_logits(sample.inputs, params, graph)[1] for sample in samples]
    labels = Tensor([sample.labels for sample in samples], model.config.tensor_dtype)
    return graph, graph.bce_loss(graph.stack(probs), labels)


def train_step(model: V2EMModel, adam: AdamState, samples: list[Sample]) -> tuple[V2EMModel, float]:
    graph, loss = batch_loss(model, samples)
    grads = graph.backward(loss)
    trainable = {name: model.state[name] for name in grads}
    state = dict(model.state)
    state.update(adam_step(adam, trainable, grads))
    return model.with_state(state), loss.value.item()


def evaluate_model(model: V2EMModel, samples: list[Sample]) -> EvalReport:
    preds = []
    for sample in samples:
        _, probs = model.segment_logits(sample.inputs)
        preds.append(predict_labels(scores_from_probs(probs, model.config.fusion.label_set)))
    return evaluate(preds, [sample.labels for sample in samples], model.labels)


def train_toy(config: ModelConfig, seed: int = 0, settings: TrainSettings = TrainSettings()) -> TrainResult:
    """Adam on BCE over a fixed synthetic training pool, reshuffled every epoch.

    The same seed reproduces the same parameters bit for bit.
    """
    model = V2EMModel.initialize(config, seed)
    train = make_dataset(np.random.default_rng([seed, 1]), config, settings.train_size)
    held_out = make_dataset(np.random.default_rng([seed, 2]), config, settings.eval_size)
    order_rng = np.random.default_rng([seed, 3])
    adam = AdamState.for_params({name: model.state[name] for name in model.trainable()}, settings.lr)
    result = TrainResult(model)

    order: list[int] = []
    for step in range(1, settings.steps + 1):
        if len(order) < settings.batch:
            order.extend(order_rng.permutation(len(train)).tolist())
        batch, order = order[:settings.batch], order[settings.batch:]
        model, loss = train_step(model, adam, [train[i] for i in batch])
        result.losses.append(loss)
        if settings.eval_every and step % settings.eval_every == 0:
            report = evaluate_model(model, held_out)
            result.history.append((step, report))
            wacc = report.macro_weighted_accuracy
            logger.info(_("Step {}: loss {:.4f}, held-out macro W_Acc {}").format(
                step, loss, "n/a" if wacc is None else f"{wacc:.4f}"))
    result.model = model
    return result


def write_training_outputs(result: TrainResult, directory: str):
    """Checkpoint, loss_curve.csv and eval_history.json."""
    save_checkpoint(result.model, directory)
    with open(os.path.join(directory, "loss_curve.csv"), "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "loss"])
        for step, loss in enumerate(result.losses, 1):
            writer.writerow([step, repr(loss)])
    history = {
        "evaluations": [{"step": step, **report.to_dict()["macro"]} for step, report in result.history],
        "summary": asdict(result.summary),
    }
    with open(os.path.join(directory, "eval_history.json"), "w", encoding="utf-8") as f:
        json.dump(history, f, indent=2)
        f.write("\n")
