"""Command-line entry point.

Exit codes: 0 success, 1 domain failure (invalid architecture, failed
runs), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import arch as A
from .runner import (
    DomainError,
    UsageError,
    STATS_HEADER,
    aggregate_stats,
    format_stats_row,
    load_config_dict,
    run_search,
    stats_csv_text,
)
from .search import substream


def _parse_hwc(text: str) -> tuple[int, int, int]:
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise UsageError(f"expected HxWxC, got {text!r}")
    try:
        h, w, c = (int(p) for p in parts)
    except ValueError:
        raise UsageError(f"expected integer HxWxC, got {text!r}")
    if min(h, w, c) < 1:
        raise UsageError(f"dimensions must be positive, got {text!r}")
    return h, w, c


def _load_space(ref: str | None) -> A.SpaceConfig:
    if ref is None:
        return A.SpaceConfig.pso_default()
    d = load_config_dict(ref)
    # Accept either a bare space document or a search config wrapping one.
    if "space" in d:
        d = d["space"]
    try:
        return A.SpaceConfig.from_dict(d)
    except (ValueError, TypeError) as e:
        raise UsageError(f"space config {ref!r}: {e}")


def _read_architecture(path: str) -> A.Architecture:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise UsageError(str(e))
    return A.deserialize(text)


def _cmd_search(args, algorithm: str) -> int:
    records = run_search(
        algorithm,
        args.config,
        args.evaluator,
        runs=args.runs,
        seed=args.seed,
        out_dir=args.out,
        dataset_ref=args.dataset,
        subset_size=args.subset_size,
        parallel_runs=args.parallel_runs,
    )
    failed = 0
    for r, record in enumerate(records):
        if record.status == "ok":
            acc = record.final["val_accuracy"]
            print(
                f"run {r}: seed {record.seed}  val_accuracy {acc:.4f}  "
                f"layers {record.layer_count}  evals {record.eval_calls}"
            )
        else:
            failed += 1
            print(f"run {r}: seed {record.seed}  FAILED: {record.error}")
    ok = [r for r in records if r.status == "ok"]
    if ok:
        row = aggregate_stats([Path(args.out) / f"run_{r:03d}" for r in range(len(records))])
        print(STATS_HEADER)
        print(format_stats_row(row))
    return 1 if failed else 0


def _cmd_stats(args) -> int:
    row = aggregate_stats(args.dirs)
    if args.csv:
        sys.stdout.write(stats_csv_text(row))
    else:
        print(STATS_HEADER)
        print(format_stats_row(row))
    return 0


def _cmd_validate(args) -> int:
    space = _load_space(args.space)
    arch = _read_architecture(args.arch_file)
    report = A.validate(arch, space)
    if report.valid:
        print("valid")
        return 0
    print(report.summary())
    return 1


def _cmd_randarch(args) -> int:
    space = _load_space(args.space)
    input_shape = _parse_hwc(args.input)
    arch = A.sample_random(space, substream(args.seed, 0, 0), input_shape, args.classes)
    print(A.serialize(arch))
    return 0


def _cmd_shapes(args) -> int:
    arch = _read_architecture(args.arch_file)
    if args.input:
        from dataclasses import replace

        arch = replace(arch, input_shape=_parse_hwc(args.input))
    try:
        shapes, head = A.shape_infer(arch)
    except A.ShapeError as e:
        print(f"shape error: {e}", file=sys.stderr)
        return 1
    print(",".join(f"({h},{w},{c})" for h, w, c in shapes))
    print(f"head flatten width: {head}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opennas",
        description="Swarm-intelligence architecture search over convolutional layer stacks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for algorithm in ("pso", "aco"):
        p = sub.add_parser(algorithm, help=f"run the {algorithm} search")
        p.add_argument("--config", required=True, help="preset name (pso_a, pso_b, aco_a, aco_b) or JSON file")
        p.add_argument(
            "--evaluator",
            required=True,
            help="surrogate:target[:FILE] | surrogate:paramband[:N] | extern:<command>",
        )
        p.add_argument("--dataset", default="synthetic", help="fashion_mnist | cifar10 | synthetic")
        p.add_argument("--subset-size", type=int, default=None)
        p.add_argument("--runs", type=int, default=1)
        p.add_argument("--seed", type=int, default=0, help="base seed; run r uses seed + r")
        p.add_argument("--out", required=True, help="output directory for run subdirectories")
        p.add_argument("--parallel-runs", type=int, default=1, help="surrogate evaluators only")
        p.set_defaults(func=lambda a, alg=algorithm: _cmd_search(a, alg))

    p = sub.add_parser("stats", help="aggregate statistics over run directories")
    p.add_argument("dirs", nargs="+", help="run directories or their parent")
    p.add_argument("--csv", action="store_true", help="machine-readable output")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("validate", help="validate an architecture document")
    p.add_argument("arch_file")
    p.add_argument("--space", default=None, help="space config (preset, file); default: stock swarm space")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("randarch", help="sample a random architecture")
    p.add_argument("--space", default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--input", default="28x28x1", help="input shape HxWxC")
    p.add_argument("--classes", type=int, default=10)
    p.set_defaults(func=_cmd_randarch)

    p = sub.add_parser("shapes", help="print per-layer output shapes")
    p.add_argument("arch_file")
    p.add_argument("--input", default=None, help="override the document's input shape (HxWxC)")
    p.set_defaults(func=_cmd_shapes)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (A.ParseError, A.SchemaError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except DomainError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
