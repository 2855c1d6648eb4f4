"""Central-difference verification of analytic gradients."""

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from src.autodiff.graph import Graph
from src.tensor.backend import EAGER
from src.tensor.tensor import DType, Tensor

TOLERANCE = 1e-3
STEP = 1e-5
BUG_FACTOR = 1.1

LossFn = Callable[[object, Mapping[str, object]], object]


@dataclass
class GradcheckReport:
    name: str
    max_rel_error: float
    per_input: dict[str, float] = field(default_factory=dict)
    tolerance: float = TOLERANCE

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: max relative error {self.max_rel_error:.3e}"


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    if analytic.size == 0:
        return 0.0
    scale = max(float(np.abs(analytic).max()), float(np.abs(numeric).max()), 1e-6)
    return float(np.abs(analytic - numeric).max()) / scale


def analytic_gradients(fn: LossFn, inputs: Mapping[str, Tensor]) -> dict[str, Tensor]:
    graph = Graph()
    nodes = graph.parameters(inputs)
    return graph.backward(fn(graph, nodes))


def _entries(shape: tuple[int, ...], max_elements: int | None, rng: np.random.Generator) -> list[tuple]:
    size = int(np.prod(shape))
    flat = np.arange(size) if max_elements is None or size <= max_elements else \
        np.sort(rng.choice(size, max_elements, replace=False))
    return [np.unravel_index(int(i), shape) for i in flat]


def gradcheck(fn: LossFn, inputs: Mapping[str, Tensor], name: str = "op", h: float = STEP,
              tolerance: float = TOLERANCE, max_elements: int | None = None, seed: int = 0,
              inject_bug: bool = False) -> GradcheckReport:
    """Compare graph gradients of fn against central differences of its eager evaluation.

    fn receives a backend and a mapping of named inputs and returns a scalar.
    Every input is promoted to F64. When max_elements is set, at most that
    many entries of each input are perturbed, chosen with the given seed.
    """
    inputs = {key: tensor.astype(DType.F64) for key, tensor in inputs.items()}
    grads = analytic_gradients(fn, inputs)
    rng = np.random.default_rng(seed)
    report = GradcheckReport(name, 0.0, tolerance=tolerance)

    for key, tensor in inputs.items():
        base = tensor.array
        entries = _entries(tensor.shape, max_elements, rng)
        numeric = np.empty(len(entries))
        analytic = np.empty(len(entries))
        for n, index in enumerate(entries):
            values = []
            for delta in (h, -h):
                shifted = base.copy()
                shifted[index] += delta
                perturbed = dict(inputs)
                perturbed[key] = Tensor.wrap(shifted, DType.F64)
                values.append(fn(EAGER, perturbed).item())
            numeric[n] = (values[0] - values[1]) / (2 * h)
            analytic[n] = grads[key].array[index]
        if inject_bug:
            analytic = analytic * BUG_FACTOR
        report.per_input[key] = relative_error(analytic, numeric)

    report.max_rel_error = max(report.per_input.values(), default=0.0)
    return report
