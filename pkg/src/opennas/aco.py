"""Ant colony search with a depth-growth schedule.

Ants assemble layer stacks one slot at a time, guided by two pheromone
tables: transitions keyed by (slot, previous kind, next kind) and
attribute values keyed by (kind, attribute, value). Rounds grow one slot
deeper each time, so early rounds rank single-layer models and later
rounds progressively deeper ones. Choices are greedy-argmax with
probability ``greediness``, roulette otherwise; each walk decays its own
trail toward the start level and the round winner reinforces its trail
toward its accuracy.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import arch as A
from .evaluation import EvalRequest, Evaluator, EvaluatorFailure, FitnessReport, dataset_spec
from .search import SearchAborted, SearchResult, substream, substream_seed

# Fallback discrete attribute choices when a space leaves the set unspecified.
DEFAULT_CONV_CHANNELS = (32, 64, 128)
DEFAULT_FC_UNITS = (64, 128, 256)

# Next-kind options after each structural kind, in stable order.
_STRUCT_OPTIONS = {
    "input": (A.CONV,),
    A.CONV: (A.CONV, A.MAXPOOL, A.AVGPOOL, A.BATCHNORM, A.DROPOUT, A.FC),
    "pool": (A.CONV, A.BATCHNORM, A.DROPOUT, A.FC),
    A.FC: (A.FC, A.DROPOUT),
}


@dataclass(frozen=True)
class AcoConfig:
    ants: int = 8
    epochs_candidate: int = 30
    max_depth: int = 20
    greediness: float = 0.5
    pheromone_start: float = 0.1
    pheromone_decay: float = 0.1
    pheromone_evaporation: float = 0.1
    space: A.SpaceConfig = field(default_factory=A.SpaceConfig.aco_default)
    seed: int = 0

    def check(self) -> None:
        if self.ants < 1:
            raise ValueError(f"ants must be >= 1, got {self.ants}")
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.epochs_candidate < 1:
            raise ValueError("epochs_candidate must be >= 1")
        if not 0.0 <= self.greediness <= 1.0:
            raise ValueError(f"greediness must be in [0,1], got {self.greediness}")
        if self.pheromone_start <= 0:
            raise ValueError("pheromone_start must be > 0")
        if self.space.layer_bounds[0] > 1:
            # The depth schedule starts at one layer, so deeper minimums
            # would make every early round invalid.
            raise ValueError(
                f"space minimum layer count must be 1 for the depth schedule, "
                f"got {self.space.layer_bounds[0]}"
            )
        for name in ("pheromone_decay", "pheromone_evaporation"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0,1], got {v}")
        self.space.check()

    def to_dict(self) -> dict:
        return {
            "ants": self.ants,
            "epochs_candidate": self.epochs_candidate,
            "max_depth": self.max_depth,
            "greediness": self.greediness,
            "pheromone_start": self.pheromone_start,
            "pheromone_decay": self.pheromone_decay,
            "pheromone_evaporation": self.pheromone_evaporation,
            "space": self.space.to_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AcoConfig":
        known = set(cls().to_dict())
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown aco config fields: {sorted(unknown)}")
        kwargs = dict(d)
        if "space" in kwargs:
            kwargs["space"] = A.SpaceConfig.from_dict(kwargs["space"])
        config = cls(**kwargs)
        config.check()
        return config


# Decision keys: ("transition", (slot, from_kind, to_kind)) or
# ("attribute", (kind, attribute_name, value)).
DecisionKey = tuple[str, tuple]


class PheromoneGraph:
    """Lazy pheromone tables; untouched entries sit at the start level."""

    def __init__(self, start: float):
        if start <= 0:
            raise ValueError("pheromone start level must be > 0")
        self.start = start
        self.transition: dict[tuple, float] = {}
        self.attribute: dict[tuple, float] = {}

    def _table(self, table: str) -> dict:
        if table == "transition":
            return self.transition
        if table == "attribute":
            return self.attribute
        raise KeyError(f"unknown pheromone table {table!r}")

    def level(self, key: DecisionKey) -> float:
        table, k = key
        return self._table(table).get(k, self.start)

    def set_level(self, key: DecisionKey, value: float) -> None:
        if not (value > 0 and np.isfinite(value)):
            raise ValueError(f"pheromone level must be positive and finite, got {value}")
        table, k = key
        self._table(table)[k] = value

    def transition_level(self, slot: int, from_kind: str, to_kind: str) -> float:
        return self.transition.get((slot, from_kind, to_kind), self.start)

    def attribute_level(self, kind: str, attribute: str, value) -> float:
        return self.attribute.get((kind, attribute, value), self.start)

    def to_jsonable(self) -> dict:
        """Inspection dump: reinforced entries only, sorted for stable output."""
        return {
            "start": self.start,
            "transition": [
                {"slot": k[0], "from": k[1], "to": k[2], "level": v}
                for k, v in sorted(self.transition.items())
            ],
            "attribute": [
                {"kind": k[0], "attribute": k[1], "value": k[2], "level": v}
                for k, v in sorted(self.attribute.items())
            ],
        }


@dataclass
class AntPath:
    decisions: list[DecisionKey]
    architecture: A.Architecture


def select_component(options, levels, greediness: float, rng: np.random.Generator):
    """Greedy argmax with probability ``greediness``, else roulette by level."""
    if not options:
        raise ValueError("select_component needs at least one option")
    if len(options) != len(levels):
        raise ValueError("options and levels must align")
    if rng.random() < greediness:
        best = 0
        for i in range(1, len(levels)):
            if levels[i] > levels[best]:
                best = i
        return options[best]
    total = float(sum(levels))
    u = rng.random() * total
    acc = 0.0
    for option, level in zip(options, levels):
        acc += level
        if u < acc:
            return option
    return options[-1]


def _attr_choices(space: A.SpaceConfig) -> dict[str, list[tuple[str, tuple]]]:
    """Discrete attribute menus per layer kind, in stable order."""
    channels = space.conv_channels_set or DEFAULT_CONV_CHANNELS
    units = space.fc_units_set or DEFAULT_FC_UNITS
    return {
        A.CONV: [("out_channels", tuple(channels)), ("kernel", tuple(space.kernel_set))],
        A.FC: [("units", tuple(units))],
        A.DROPOUT: [("rate", tuple(space.dropout_set))],
    }


def _legal_kinds(base_kind: str, used_modifiers: set[str], space: A.SpaceConfig,
                 h: int, w: int) -> list[str]:
    options = [k for k in _STRUCT_OPTIONS[base_kind] if k not in used_modifiers]
    if h < A.POOL_WINDOW or w < A.POOL_WINDOW:
        options = [k for k in options if k not in A.POOL_KINDS]
    if not space.batch_norm_enabled:
        options = [k for k in options if k != A.BATCHNORM]
    if not space.dropout_set:
        options = [k for k in options if k != A.DROPOUT]
    probs = space.layer_type_probabilities
    if probs["pool"] == 0.0:
        options = [k for k in options if k not in A.POOL_KINDS]
    if probs["fc"] == 0.0:
        options = [k for k in options if k != A.FC]
    return options


def ant_walk(
    graph: PheromoneGraph,
    depth_limit: int,
    config: AcoConfig,
    rng: np.random.Generator,
    input_shape: tuple[int, int, int] = (28, 28, 1),
    num_classes: int = 10,
) -> AntPath:
    """Assemble one candidate of at most ``depth_limit`` layers.

    Starts from a virtual input node (so the first layer is always conv),
    picks each slot's kind from the transition table and each attribute
    from the attribute table, and stops early only if the grammar leaves
    no legal option.
    """
    if depth_limit < 1:
        raise ValueError("depth_limit must be >= 1")
    space = config.space
    menus = _attr_choices(space)
    decisions: list[DecisionKey] = []
    layers: list[A.LayerSpec] = []
    h, w = input_shape[0], input_shape[1]
    prev_kind = "input"
    base_kind = "input"
    used_modifiers: set[str] = set()

    for slot in range(min(depth_limit, space.layer_bounds[1])):
        options = _legal_kinds(base_kind, used_modifiers, space, h, w)
        if not options:
            break
        levels = [graph.transition_level(slot, prev_kind, k) for k in options]
        kind = select_component(options, levels, config.greediness, rng)
        decisions.append(("transition", (slot, prev_kind, kind)))

        attrs = {}
        for attr_name, values in menus.get(kind, []):
            levels = [graph.attribute_level(kind, attr_name, v) for v in values]
            value = select_component(values, levels, config.greediness, rng)
            decisions.append(("attribute", (kind, attr_name, value)))
            attrs[attr_name] = value

        layers.append(A.LayerSpec(kind, **attrs))
        if kind in A.POOL_KINDS:
            h, w = h // A.POOL_STRIDE, w // A.POOL_STRIDE
        if kind in (A.BATCHNORM, A.DROPOUT):
            used_modifiers.add(kind)
        else:
            base_kind = "pool" if kind in A.POOL_KINDS else kind
            used_modifiers = set()
        prev_kind = kind

    return AntPath(decisions, A.Architecture(tuple(layers), tuple(input_shape), num_classes))


def local_update(graph: PheromoneGraph, path: AntPath, config: AcoConfig) -> None:
    """Decay every decision on the path toward the start level."""
    for key in path.decisions:
        level = graph.level(key)
        graph.set_level(key, (1.0 - config.pheromone_decay) * level
                        + config.pheromone_decay * config.pheromone_start)


def global_update(graph: PheromoneGraph, best_path: AntPath, fitness: float,
                  config: AcoConfig) -> None:
    """Pull every decision on the winning path toward its accuracy."""
    if not 0.0 <= fitness <= 1.0:
        raise ValueError(f"fitness must be in [0,1], got {fitness}")
    for key in best_path.decisions:
        level = graph.level(key)
        graph.set_level(key, (1.0 - config.pheromone_evaporation) * level
                        + config.pheromone_evaporation * fitness)


def aco_run(
    config: AcoConfig,
    evaluator: Evaluator,
    dataset_ref: str = "synthetic",
    subset_size: int | None = None,
) -> SearchResult:
    """Depth-scheduled colony search: ants * max_depth evaluations total.

    Round d sends every ant on a depth-d walk (local decay after each),
    evaluates all candidates at the per-candidate budget, and lets the
    round's most accurate path lay down the global reinforcement. The
    best candidate across all rounds is returned as found, un-retrained.
    """
    config.check()
    input_shape, num_classes = dataset_spec(dataset_ref)
    graph = PheromoneGraph(config.pheromone_start)
    history: list[dict] = []
    t0 = time.perf_counter()
    reported_s = 0.0
    eval_calls = 0

    best_arch: A.Architecture | None = None
    best_report: FitnessReport | None = None

    try:
        for depth in range(1, config.max_depth + 1):
            round_accs: list[float] = []
            round_best: tuple[AntPath, FitnessReport] | None = None
            for ant in range(config.ants):
                rng = substream(config.seed, depth, ant)
                path = ant_walk(graph, depth, config, rng, input_shape, num_classes)
                local_update(graph, path, config)
                req = EvalRequest(
                    path.architecture, config.epochs_candidate, dataset_ref,
                    subset_size, substream_seed(config.seed, depth, ant),
                )
                report = evaluator.evaluate(req)
                reported_s += report.wall_seconds
                eval_calls += 1
                round_accs.append(report.val_accuracy)
                if round_best is None or report.val_accuracy > round_best[1].val_accuracy:
                    round_best = (path, report)
                if best_report is None or report.val_accuracy > best_report.val_accuracy:
                    best_arch, best_report = path.architecture, report
            global_update(graph, round_best[0], round_best[1].val_accuracy, config)
            history.append(
                {
                    "depth": depth,
                    "best_acc": best_report.val_accuracy,
                    "mean_acc": sum(round_accs) / len(round_accs),
                    "elapsed_s": reported_s,
                }
            )
    except EvaluatorFailure as e:
        raise SearchAborted(f"aco run aborted: {e}", history, "aco") from e

    return SearchResult(
        algorithm="aco",
        best_architecture=best_arch,
        best_report=best_report,
        history=history,
        eval_calls=eval_calls,
        seed=config.seed,
        wall_s=time.perf_counter() - t0,
        pheromone=graph.to_jsonable(),
    )
