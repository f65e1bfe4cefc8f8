"""Shared search machinery: seeded substreams, result records, random baseline.

Both searches draw every random number from per-step substreams derived
from the run seed, so results never depend on evaluation order or
parallelism. History rows carry cumulative evaluator-reported seconds,
never the engine wall clock, which keeps same-seed runs byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import arch as A
from .evaluation import EvalRequest, Evaluator, FitnessReport, dataset_spec

_MASK64 = (1 << 64) - 1


def substream(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for one (seed, step...) coordinate."""
    return np.random.default_rng(np.random.SeedSequence([seed & _MASK64, *path]))


def substream_seed(seed: int, *path: int) -> int:
    """Stable 64-bit integer seed for one coordinate, for downstream backends."""
    return int(np.random.SeedSequence([seed & _MASK64, *path]).generate_state(1, np.uint64)[0])


class SearchAborted(RuntimeError):
    """A run died mid-search; carries whatever history was accumulated."""

    def __init__(self, message: str, history: list[dict], algorithm: str):
        super().__init__(message)
        self.history = history
        self.algorithm = algorithm


@dataclass
class SearchResult:
    algorithm: str
    best_architecture: A.Architecture
    best_report: FitnessReport  # final report (for PSO: the long-budget retrain)
    history: list[dict] = field(default_factory=list)
    eval_calls: int = 0
    seed: int = 0
    wall_s: float = 0.0  # engine-measured, including any final retrain
    wall_s_final_eval: float = 0.0
    pheromone: dict | None = None  # colony runs attach their final tables

    @property
    def wall_s_search_only(self) -> float:
        return self.wall_s - self.wall_s_final_eval


HISTORY_COLUMNS = {
    "pso": ("iteration", "best_loss", "best_acc", "mean_loss", "elapsed_s"),
    "aco": ("depth", "best_acc", "mean_acc", "elapsed_s"),
}


@dataclass
class RandomSearchBaseline:
    """Best-of-N uniform sampling; the reference point searches must beat."""

    best_architecture: A.Architecture
    best_report: FitnessReport
    eval_calls: int


def random_search(
    space: A.SpaceConfig,
    evaluator: Evaluator,
    samples: int,
    seed: int,
    dataset_ref: str = "synthetic",
    epochs: int = 1,
    subset_size: int | None = None,
) -> RandomSearchBaseline:
    """Evaluate ``samples`` independent uniform draws and keep the best.

    Selection follows the swarm convention: lowest validation loss wins,
    ties keep the earlier draw.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    input_shape, num_classes = dataset_spec(dataset_ref)
    best: tuple[A.Architecture, FitnessReport] | None = None
    for i in range(samples):
        rng = substream(seed, 0, i)
        arch = A.sample_random(space, rng, input_shape, num_classes)
        report = evaluator.evaluate(
            EvalRequest(arch, epochs, dataset_ref, subset_size, substream_seed(seed, 0, i))
        )
        if best is None or report.val_loss < best[1].val_loss:
            best = (arch, report)
    assert best is not None
    return RandomSearchBaseline(best[0], best[1], samples)
