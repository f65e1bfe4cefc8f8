"""Particle swarm search over variable-length layer stacks.

A particle's position is an architecture. Velocities are slot-wise edit
plans (keep / replace / add / remove) computed against the particle's own
best and the swarm best, mixed slot-by-slot with probability ``cg`` of
inheriting the swarm-best correction. Candidates are ranked by validation
loss; the winner gets one long-budget re-evaluation at the end.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import arch as A
from .evaluation import EvalRequest, Evaluator, EvaluatorFailure, FitnessReport, dataset_spec
from .search import SearchAborted, SearchResult, substream, substream_seed

KEEP = "keep"
REPLACE = "replace"
ADD = "add"
REMOVE = "remove"


@dataclass(frozen=True)
class SlotOp:
    op: str
    layer: A.LayerSpec | None = None


OP_KEEP = SlotOp(KEEP)
OP_REMOVE = SlotOp(REMOVE)

OpSequence = tuple[SlotOp, ...]


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 20
    iterations: int = 10
    cg: float = 0.5
    epochs_particle: int = 5
    epochs_gbest: int = 100
    space: A.SpaceConfig = field(default_factory=A.SpaceConfig.pso_default)
    seed: int = 0

    def check(self) -> None:
        if self.swarm_size < 1:
            raise ValueError(f"swarm_size must be >= 1, got {self.swarm_size}")
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if not 0.0 <= self.cg <= 1.0:
            raise ValueError(f"cg must be in [0,1], got {self.cg}")
        if self.epochs_particle < 1 or self.epochs_gbest < 1:
            raise ValueError("epoch budgets must be >= 1")
        self.space.check()

    def to_dict(self) -> dict:
        return {
            "swarm_size": self.swarm_size,
            "iterations": self.iterations,
            "cg": self.cg,
            "epochs_particle": self.epochs_particle,
            "epochs_gbest": self.epochs_gbest,
            "space": self.space.to_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PsoConfig":
        known = {"swarm_size", "iterations", "cg", "epochs_particle", "epochs_gbest", "space", "seed"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown pso config fields: {sorted(unknown)}")
        kwargs = dict(d)
        if "space" in kwargs:
            kwargs["space"] = A.SpaceConfig.from_dict(kwargs["space"])
        config = cls(**kwargs)
        config.check()
        return config


@dataclass
class Particle:
    index: int
    position: A.Architecture
    pbest: A.Architecture
    pbest_report: FitnessReport | None = None  # None until first evaluation


def init_swarm(
    config: PsoConfig,
    input_shape: tuple[int, int, int],
    num_classes: int,
) -> list[Particle]:
    """Independently sampled particles; pbest starts at the unevaluated position."""
    swarm = []
    for p in range(config.swarm_size):
        rng = substream(config.seed, 0, p)
        pos = A.sample_random(config.space, rng, input_shape, num_classes)
        swarm.append(Particle(index=p, position=pos, pbest=pos))
    return swarm


def diff(current: A.Architecture, reference: A.Architecture) -> OpSequence:
    """Slot-wise edit plan that turns ``current`` into ``reference``."""
    ops: list[SlotOp] = []
    n = max(len(current.layers), len(reference.layers))
    for i in range(n):
        if i >= len(current.layers):
            ops.append(SlotOp(ADD, reference.layers[i]))
        elif i >= len(reference.layers):
            ops.append(OP_REMOVE)
        elif current.layers[i] == reference.layers[i]:
            ops.append(OP_KEEP)
        else:
            ops.append(SlotOp(REPLACE, reference.layers[i]))
    return tuple(ops)


def combine_velocity(
    diff_g: OpSequence, diff_p: OpSequence, cg: float, rng: np.random.Generator
) -> OpSequence:
    """Per slot, inherit the swarm-best op with probability ``cg``, else the personal one."""
    n = max(len(diff_g), len(diff_p))
    g = diff_g + (OP_KEEP,) * (n - len(diff_g))
    p = diff_p + (OP_KEEP,) * (n - len(diff_p))
    return tuple(g[i] if rng.random() < cg else p[i] for i in range(n))


def apply_velocity(
    position: A.Architecture,
    velocity: OpSequence,
    space: A.SpaceConfig,
    rng: np.random.Generator,
) -> A.Architecture:
    """Apply an op sequence left to right, then repair to a valid architecture.

    Length is clamped to the layer bounds (removes are ignored at the
    minimum, adds at the maximum). Repair re-draws a conv for a bad first
    layer or an underflowing pool, and turns any conv/pool stranded after
    an fc into a sampled fc, so the result always validates.
    """
    mn, mx = space.layer_bounds
    layers = list(position.layers)
    cursor = 0
    for op in velocity:
        if op.op == KEEP:
            if cursor < len(layers):
                cursor += 1
        elif op.op == REPLACE:
            if cursor < len(layers):
                layers[cursor] = op.layer
                cursor += 1
            elif len(layers) < mx:
                layers.append(op.layer)
                cursor = len(layers)
        elif op.op == ADD:
            if len(layers) < mx:
                layers.insert(cursor, op.layer)
                cursor += 1
        elif op.op == REMOVE:
            if cursor < len(layers):
                if len(layers) > mn:
                    del layers[cursor]
                else:
                    cursor += 1  # ignored at minimum length: acts as keep
        else:
            raise ValueError(f"unknown slot op {op.op!r}")

    if not layers:
        layers = [A.sample_conv(space, rng)]
    if layers[0].kind != A.CONV:
        layers[0] = A.sample_conv(space, rng)

    h, w = position.input_shape[0], position.input_shape[1]
    fc_seen = False
    for i, layer in enumerate(layers):
        if layer.kind in (A.CONV, *A.POOL_KINDS) and fc_seen:
            layers[i] = A.sample_fc(space, rng)
            continue
        if layer.kind in A.POOL_KINDS:
            if h < A.POOL_WINDOW or w < A.POOL_WINDOW:
                layers[i] = A.sample_conv(space, rng)
            else:
                h, w = h // A.POOL_STRIDE, w // A.POOL_STRIDE
        elif layer.kind == A.FC:
            fc_seen = True
    return replace(position, layers=tuple(layers))


def pso_run(
    config: PsoConfig,
    evaluator: Evaluator,
    dataset_ref: str = "synthetic",
    subset_size: int | None = None,
) -> SearchResult:
    """Full swarm search: init wave, ``iterations`` update waves, final retrain.

    Budget-limited evaluations total swarm_size * (iterations + 1), plus one
    long-budget call for the returned best. Raises SearchAborted on backend
    failure with the partial history attached.
    """
    config.check()
    input_shape, num_classes = dataset_spec(dataset_ref)
    history: list[dict] = []
    t0 = time.perf_counter()
    reported_s = 0.0
    eval_calls = 0

    def evaluate(arch: A.Architecture, epochs: int, it: int, p: int) -> FitnessReport:
        nonlocal reported_s, eval_calls
        req = EvalRequest(arch, epochs, dataset_ref, subset_size, substream_seed(config.seed, it, p))
        report = evaluator.evaluate(req)
        reported_s += report.wall_seconds
        eval_calls += 1
        return report

    swarm = init_swarm(config, input_shape, num_classes)
    gbest: A.Architecture | None = None
    gbest_report: FitnessReport | None = None

    def refresh_gbest():
        nonlocal gbest, gbest_report
        for part in swarm:
            if part.pbest_report is None:
                continue
            if gbest_report is None or part.pbest_report.val_loss < gbest_report.val_loss:
                gbest = part.pbest
                gbest_report = part.pbest_report

    def record(iteration: int, losses: list[float]):
        history.append(
            {
                "iteration": iteration,
                "best_loss": gbest_report.val_loss,
                "best_acc": gbest_report.val_accuracy,
                "mean_loss": sum(losses) / len(losses),
                "elapsed_s": reported_s,
            }
        )

    try:
        losses = []
        for part in swarm:
            report = evaluate(part.position, config.epochs_particle, 0, part.index)
            part.pbest_report = report
            losses.append(report.val_loss)
        refresh_gbest()
        record(0, losses)

        for it in range(1, config.iterations + 1):
            losses = []
            for part in swarm:
                rng = substream(config.seed, it, part.index)
                diff_g = diff(part.position, gbest)
                diff_p = diff(part.position, part.pbest)
                velocity = combine_velocity(diff_g, diff_p, config.cg, rng)
                part.position = apply_velocity(part.position, velocity, config.space, rng)
                report = evaluate(part.position, config.epochs_particle, it, part.index)
                losses.append(report.val_loss)
                if report.val_loss < part.pbest_report.val_loss:
                    part.pbest = part.position
                    part.pbest_report = report
            refresh_gbest()  # synchronous update, once per wave
            record(it, losses)

        t_retrain = time.perf_counter()
        final_report = evaluate(gbest, config.epochs_gbest, config.iterations + 1, 0)
        wall_final = time.perf_counter() - t_retrain
    except EvaluatorFailure as e:
        raise SearchAborted(f"pso run aborted: {e}", history, "pso") from e

    return SearchResult(
        algorithm="pso",
        best_architecture=gbest,
        best_report=final_report,
        history=history,
        eval_calls=eval_calls,
        seed=config.seed,
        wall_s=time.perf_counter() - t0,
        wall_s_final_eval=wall_final,
    )
