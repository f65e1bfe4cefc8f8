"""Multi-run orchestration, run-directory persistence, and statistics.

A batch of runs shares one base seed; run r executes with seed + r. Each
run writes its own directory (config snapshot, history CSV, best
architecture document, summary record) so statistics can always be
recomputed from disk alone.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

from . import arch as A
from .aco import AcoConfig, aco_run
from .evaluation import (
    Evaluator,
    EvaluatorFailure,
    ExternTrainer,
    ParamBandSurrogate,
    TargetSurrogate,
    dataset_spec,
)
from .pso import PsoConfig, pso_run
from .search import HISTORY_COLUMNS, SearchAborted, SearchResult, substream

PRESETS = ("pso_a", "pso_b", "aco_a", "aco_b")


class UsageError(ValueError):
    """Bad arguments or configuration; maps to exit code 2."""


class DomainError(RuntimeError):
    """Valid request that failed on the data; maps to exit code 1."""


def load_config_dict(ref: str) -> dict:
    """Load a config by preset name or JSON file path."""
    if ref in PRESETS:
        text = resources.files("opennas").joinpath(f"presets/{ref}.json").read_text()
        return json.loads(text)
    path = Path(ref)
    if not path.exists():
        raise UsageError(f"config {ref!r} is neither a preset ({', '.join(PRESETS)}) nor a file")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}:{e.lineno}: {e.msg}")


def load_search_config(algorithm: str, ref: str, seed: int | None = None):
    d = load_config_dict(ref)
    try:
        if algorithm == "pso":
            config = PsoConfig.from_dict(d)
        elif algorithm == "aco":
            config = AcoConfig.from_dict(d)
        else:
            raise UsageError(f"unknown algorithm {algorithm!r}")
    except (ValueError, TypeError) as e:
        raise UsageError(f"config {ref!r}: {e}")
    if seed is not None:
        from dataclasses import replace

        config = replace(config, seed=seed)
    return config


def evaluator_factory(
    spec: str,
    space: A.SpaceConfig,
    base_seed: int,
    dataset_ref: str,
) -> Callable[[], Evaluator]:
    """Turn an --evaluator spec into a per-run evaluator constructor.

    surrogate:target           hidden target drawn from the space (base seed)
    surrogate:target:FILE      hidden target read from an architecture document
    surrogate:paramband        parameter-band peak at 1e5 parameters
    surrogate:paramband:N      parameter-band peak at N parameters
    extern:COMMAND             spawn a trainer process per run
    """
    input_shape, num_classes = dataset_spec(dataset_ref)
    if spec == "surrogate:target":
        target = A.sample_random(space, substream(base_seed, 99, 0), input_shape, num_classes)
        return lambda: TargetSurrogate(target)
    if spec.startswith("surrogate:target:"):
        path = spec[len("surrogate:target:"):]
        try:
            target = A.deserialize(Path(path).read_text())
        except OSError as e:
            raise UsageError(f"target architecture file: {e}")
        except A.ArchError as e:
            raise UsageError(f"target architecture file {path}: {e}")
        return lambda: TargetSurrogate(target)
    if spec == "surrogate:paramband":
        return lambda: ParamBandSurrogate()
    if spec.startswith("surrogate:paramband:"):
        raw = spec[len("surrogate:paramband:"):]
        try:
            center = int(float(raw))
        except ValueError:
            raise UsageError(f"bad paramband center {raw!r}")
        return lambda: ParamBandSurrogate(center)
    if spec.startswith("extern:"):
        command = spec[len("extern:"):]
        if not command.strip():
            raise UsageError("extern evaluator needs a command after the colon")
        return lambda: ExternTrainer(command, expand_space=space)
    raise UsageError(
        f"unknown evaluator spec {spec!r}; expected surrogate:target, surrogate:paramband, or extern:<command>"
    )


@dataclass
class RunRecord:
    algorithm: str
    status: str  # "ok" | "failed"
    seed: int
    error: str | None = None
    final: dict | None = None  # FitnessReport fields
    wall_minutes: float = 0.0  # includes the final long-budget evaluation
    wall_minutes_search: float = 0.0  # excludes it
    layer_count: int | None = None  # materialized convention (expansions counted)
    layer_count_raw: int | None = None
    eval_calls: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(**d)


def history_csv_text(algorithm: str, history: list[dict]) -> str:
    columns = HISTORY_COLUMNS[algorithm]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in history:
        writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in columns])
    return buf.getvalue()


def write_run_dir(
    run_dir: Path,
    algorithm: str,
    config,
    dataset_ref: str,
    subset_size: int | None,
    evaluator_spec: str,
    record: RunRecord,
    history: list[dict],
    result: SearchResult | None,
) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    snapshot = {
        "algorithm": algorithm,
        "dataset": dataset_ref,
        "subset_size": subset_size,
        "evaluator": evaluator_spec,
        "config": config.to_dict(),
    }
    (run_dir / "config.json").write_text(json.dumps(snapshot, indent=2) + "\n")
    (run_dir / "history.csv").write_text(history_csv_text(algorithm, history))
    (run_dir / "summary.json").write_text(json.dumps(record.to_dict(), indent=2) + "\n")
    if result is not None:
        (run_dir / "best_architecture.json").write_text(A.serialize(result.best_architecture))
        if result.pheromone is not None:
            (run_dir / "pheromone.json").write_text(json.dumps(result.pheromone, indent=2) + "\n")


def _execute_one(
    algorithm: str,
    config,
    make_evaluator: Callable[[], Evaluator],
    dataset_ref: str,
    subset_size: int | None,
) -> tuple[RunRecord, list[dict], SearchResult | None]:
    try:
        evaluator = make_evaluator()
    except EvaluatorFailure as e:
        record = RunRecord(algorithm=algorithm, status="failed", seed=config.seed, error=str(e))
        return record, [], None
    try:
        if algorithm == "pso":
            result = pso_run(config, evaluator, dataset_ref, subset_size)
        else:
            result = aco_run(config, evaluator, dataset_ref, subset_size)
    except SearchAborted as e:
        record = RunRecord(algorithm=algorithm, status="failed", seed=config.seed, error=str(e))
        return record, e.history, None
    finally:
        evaluator.close()

    record = RunRecord(
        algorithm=algorithm,
        status="ok",
        seed=config.seed,
        final=asdict(result.best_report),
        wall_minutes=result.wall_s / 60.0,
        wall_minutes_search=result.wall_s_search_only / 60.0,
        layer_count=A.materialized_layer_count(result.best_architecture, config.space),
        layer_count_raw=len(result.best_architecture.layers),
        eval_calls=result.eval_calls,
    )
    return record, result.history, result


def run_search(
    algorithm: str,
    config_ref: str,
    evaluator_spec: str,
    runs: int,
    seed: int,
    out_dir: str | Path,
    dataset_ref: str = "synthetic",
    subset_size: int | None = None,
    parallel_runs: int = 1,
) -> list[RunRecord]:
    """Execute ``runs`` seeded searches and persist one directory per run."""
    if runs < 1:
        raise UsageError("runs must be >= 1")
    if parallel_runs < 1:
        raise UsageError("parallel-runs must be >= 1")
    if parallel_runs > 1 and evaluator_spec.startswith("extern:"):
        raise UsageError("--parallel-runs requires a surrogate evaluator")
    base = load_search_config(algorithm, config_ref, seed)
    make_evaluator = evaluator_factory(evaluator_spec, base.space, seed, dataset_ref)
    out = Path(out_dir)

    from dataclasses import replace

    def one(r: int) -> RunRecord:
        config = replace(base, seed=seed + r)
        record, history, result = _execute_one(
            algorithm, config, make_evaluator, dataset_ref, subset_size
        )
        write_run_dir(
            out / f"run_{r:03d}", algorithm, config, dataset_ref, subset_size,
            evaluator_spec, record, history, result,
        )
        return record

    if parallel_runs == 1:
        return [one(r) for r in range(runs)]
    with ThreadPoolExecutor(max_workers=parallel_runs) as pool:
        return list(pool.map(one, range(runs)))


@dataclass(frozen=True)
class StatsRow:
    acc_max: float
    acc_mean: float
    acc_stdev: float  # sample standard deviation; 0 for a single run
    time_mean_minutes: float
    layers_of_best: int
    runs: int


def is_run_dir(path: Path) -> bool:
    return (path / "summary.json").is_file()


def collect_run_dirs(paths) -> list[Path]:
    """Accept run directories or batch directories that contain them."""
    found: list[Path] = []
    for p in paths:
        p = Path(p)
        if is_run_dir(p):
            found.append(p)
        elif p.is_dir():
            found.extend(sorted(child for child in p.iterdir() if is_run_dir(child)))
    return found


def read_record(run_dir: Path) -> RunRecord:
    return RunRecord.from_dict(json.loads((run_dir / "summary.json").read_text()))


def aggregate_stats(run_dirs) -> StatsRow:
    """Max / mean / sample-stdev of final accuracies plus mean wall minutes.

    ``layers_of_best`` is the layer count of the single best run. All
    records must come from the same algorithm.
    """
    dirs = collect_run_dirs(run_dirs)
    if not dirs:
        raise UsageError("no run directories with a summary.json found")
    records = [read_record(d) for d in dirs]
    algorithms = {r.algorithm for r in records}
    if len(algorithms) > 1:
        raise UsageError(f"refusing to aggregate across algorithms: {sorted(algorithms)}")
    ok = [r for r in records if r.status == "ok"]
    if not ok:
        raise DomainError("all runs failed; nothing to aggregate")

    accs = [r.final["val_accuracy"] for r in ok]
    best = max(ok, key=lambda r: r.final["val_accuracy"])
    return StatsRow(
        acc_max=max(accs),
        acc_mean=statistics.fmean(accs),
        acc_stdev=statistics.stdev(accs) if len(accs) > 1 else 0.0,
        time_mean_minutes=statistics.fmean(r.wall_minutes for r in ok),
        layers_of_best=best.layer_count,
        runs=len(ok),
    )


STATS_HEADER = "acc_max  acc_mean  acc_stdev  time_min  layers"


def format_stats_row(row: StatsRow) -> str:
    """Fixed-format report row: accuracies to 3 decimals, minutes rounded."""
    return (
        f"{row.acc_max:.3f}  {row.acc_mean:.3f}  {row.acc_stdev:.3f}  "
        f"{round(row.time_mean_minutes)}  {row.layers_of_best}"
    )


def stats_csv_text(row: StatsRow) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["acc_max", "acc_mean", "acc_stdev", "time_mean_minutes", "layers_of_best", "runs"])
    writer.writerow([
        repr(row.acc_max), repr(row.acc_mean), repr(row.acc_stdev),
        repr(row.time_mean_minutes), row.layers_of_best, row.runs,
    ])
    return buf.getvalue()
