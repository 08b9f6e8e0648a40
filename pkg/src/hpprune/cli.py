"""Command-line interface.

Data goes to stdout as JSON (sorted keys, two-space indent) unless
--pretty asks for a table; diagnostics go to stderr.  Exit codes:
0 success, 1 usage errors, 2 data errors (bad container, manifest, or
report), 3 evaluator protocol failures.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import costs
from .clustering import cluster as run_clustering
from .driver import DEFAULT_LOSS_BUDGET, SubprocessEvaluator, run
from .errors import DataError, EvaluatorError, UsageError
from .model_io import (
    load_model,
    read_manifest,
    read_report,
    report_to_dict,
    write_report,
)
from .pyramid import build_layer_pyramids, decompose_channels, n_levels
from .search import CandidateSet, find_closest


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit_json(obj) -> None:
    print(json.dumps(obj, sort_keys=True, indent=2))


def _layer_or_fail(manifest, layer_id: int):
    for spec in manifest.layers:
        if spec.layer_id == layer_id:
            return spec
    raise UsageError(f"no conv layer with id {layer_id} (have {list(manifest.layer_ids())})")


def _load_layer_pyramids(model_dir: str, layer_id: int):
    manifest, tensors = load_model(model_dir)
    spec = _layer_or_fail(manifest, layer_id)
    return spec, build_layer_pyramids(tensors[layer_id], spec)


def cmd_inspect(args) -> int:
    manifest = read_manifest(args.model)
    layers = []
    for spec in manifest.layers:
        s, m = decompose_channels(spec.in_channels)
        layers.append(
            {
                "id": spec.layer_id,
                "kernel_side": spec.kernel_side,
                "in_channels": spec.in_channels,
                "num_filters": spec.num_filters,
                "out_h": spec.out_h,
                "out_w": spec.out_w,
                "s": s,
                "m": m,
                "levels": n_levels(s, m),
            }
        )
    payload = {
        "name": manifest.name,
        "layers": layers,
        "fc": [{"in_dim": fc.in_dim, "out_dim": fc.out_dim} for fc in manifest.fc],
    }
    if args.pretty:
        print(f"model: {manifest.name}")
        print("layer  k  in_ch  filters  out    s  m  levels")
        for row in layers:
            print(
                f"{row['id']:>5}  {row['kernel_side']:<1}  {row['in_channels']:>5}"
                f"  {row['num_filters']:>7}  {row['out_h']:>2}x{row['out_w']:<2}"
                f"  {row['s']:>1}  {row['m']:>1}  {row['levels']:>6}"
            )
        for i, fc in enumerate(manifest.fc, start=1):
            print(f"   fc{i}  {fc.in_dim} -> {fc.out_dim}")
    else:
        _emit_json(payload)
    return 0


def cmd_build(args) -> int:
    spec, pyramids = _load_layer_pyramids(args.model, args.layer)
    if args.filter is not None:
        by_label = {p.filter_index: p for p in pyramids}
        if args.filter not in by_label:
            raise UsageError(
                f"layer {args.layer} has filters 1..{spec.num_filters}, got {args.filter}"
            )
        _emit_json(by_label[args.filter].to_dict())
    else:
        _emit_json(
            {
                "layer": args.layer,
                "s": pyramids[0].s,
                "m": pyramids[0].m,
                "levels": pyramids[0].num_levels,
                "filters": [{"filter": p.filter_index, "root": p.root} for p in pyramids],
            }
        )
    return 0


def cmd_cluster(args) -> int:
    _, pyramids = _load_layer_pyramids(args.model, args.layer)
    if not 1 <= args.clusters <= len(pyramids):
        raise UsageError(f"--clusters must be in [1, {len(pyramids)}], got {args.clusters}")
    if args.strategy == "seeded-random" and args.seed is None:
        raise UsageError("--strategy seeded-random requires --seed")
    result = run_clustering(
        pyramids, args.clusters, strategy=args.strategy, random_state=args.seed
    )
    payload = result.to_dict()
    payload["layer"] = args.layer
    if args.pretty:
        print(f"layer {args.layer}: {args.clusters} clusters,"
              f" {result.iteration_count} iterations, converged={result.converged}")
        for member_set in result.clusters:
            members = " ".join(str(i) for i in member_set.members)
            print(f"  rep {member_set.representative:>4}: {members}")
    else:
        _emit_json(payload)
    return 0


def cmd_nn(args) -> int:
    spec, pyramids = _load_layer_pyramids(args.model, args.layer)
    by_label = {p.filter_index: p for p in pyramids}
    if args.query not in by_label:
        raise UsageError(f"layer {args.layer} has filters 1..{spec.num_filters}, got {args.query}")
    key = by_label[args.query]
    others = [p for p in pyramids if p.filter_index != args.query]
    if not others:
        raise UsageError("layer has a single filter; nothing to search")
    result = find_closest(key, CandidateSet(others), use_level_bounds=not args.no_level_bounds)
    _emit_json(
        {
            "layer": args.layer,
            "query": args.query,
            "nearest": result.best_index,
            "distance_sq": result.distance_sq,
            "stats": {
                "candidates_examined": result.stats.candidates_examined,
                "window_rejections": result.stats.window_rejections,
                "level_rejections": result.stats.level_rejections,
                "base_evaluations": result.stats.base_evaluations,
            },
        }
    )
    return 0


def cmd_count(args) -> int:
    manifest = read_manifest(args.model)
    retained = None
    if args.report:
        report = read_report(args.report, manifest)
        retained = costs.retained_counts_from_report(report)
    cost_report = costs.count(manifest, retained)
    if args.pretty:
        print(costs.format_table(cost_report))
    else:
        _emit_json(cost_report.to_dict())
    return 0


def cmd_prune(args) -> int:
    if args.loss < 0:
        raise UsageError(f"--loss must be >= 0, got {args.loss}")
    if args.epochs < 0:
        raise UsageError(f"--epochs must be >= 0, got {args.epochs}")
    if args.strategy == "seeded-random" and args.seed is None:
        raise UsageError("--strategy seeded-random requires --seed")
    read_manifest(args.model)  # surface container problems before starting the evaluator
    evaluator = SubprocessEvaluator(args.evaluator, timeout=args.timeout)
    try:
        report = run(
            args.model,
            evaluator,
            args.loss,
            epochs=args.epochs,
            strategy=args.strategy,
            random_state=args.seed,
            recluster_from_original=args.recluster_from_original,
        )
        evaluator.close()
    except BaseException:
        evaluator.kill()
        raise
    payload = report_to_dict(report)
    if args.out:
        write_report(report, args.out)
        print(f"report written to {args.out}", file=sys.stderr)
    _emit_json(payload)
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="hpprune", description="Pyramid-guided filter pruning toolkit")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("inspect", help="summarize a model container")
    p.add_argument("--model", required=True, help="model container directory")
    p.add_argument("--pretty", action="store_true", help="table instead of JSON")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("build", help="build filter pyramids for one layer")
    p.add_argument("--model", required=True)
    p.add_argument("--layer", required=True, type=int, help="conv layer id")
    p.add_argument("--filter", type=int, help="1-based filter index (full pyramid dump)")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("cluster", help="cluster one layer's filters")
    p.add_argument("--model", required=True)
    p.add_argument("--layer", required=True, type=int)
    p.add_argument("--clusters", required=True, type=int)
    p.add_argument(
        "--strategy", default="even-spaced", choices=["even-spaced", "seeded-random"]
    )
    p.add_argument("--seed", type=int)
    p.add_argument("--pretty", action="store_true")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("nn", help="exact nearest filter within a layer")
    p.add_argument("--model", required=True)
    p.add_argument("--layer", required=True, type=int)
    p.add_argument("--query", required=True, type=int, help="1-based filter index")
    p.add_argument(
        "--no-level-bounds",
        action="store_true",
        help="skip per-level rejection (same answer, more work)",
    )
    p.set_defaults(func=cmd_nn)

    p = sub.add_parser("count", help="parameter and FLOP accounting")
    p.add_argument("--model", required=True)
    p.add_argument("--report", help="apply retained sets from a prune report")
    p.add_argument("--pretty", action="store_true")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("prune", help="run the backward retention search")
    p.add_argument("--model", required=True)
    p.add_argument(
        "--evaluator",
        required=True,
        help="command line of a wire-protocol evaluator (quoted)",
    )
    p.add_argument("--loss", type=float, default=DEFAULT_LOSS_BUDGET,
                   help="accuracy loss budget (default %(default)s)")
    p.add_argument("--epochs", type=int, default=1, help="fine-tune epochs per evaluation")
    p.add_argument("--seed", type=int)
    p.add_argument(
        "--strategy", default="even-spaced", choices=["even-spaced", "seeded-random"]
    )
    p.add_argument(
        "--recluster-from-original",
        action="store_true",
        help="re-partition each round from the layer's full filter set",
    )
    p.add_argument("--timeout", type=float, default=600.0,
                   help="seconds to wait for each evaluator reply")
    p.add_argument("--out", help="also write the report to this file")
    p.set_defaults(func=cmd_prune)

    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = _build_parser()
    if not argv:
        parser.print_help(sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
        if not hasattr(args, "func"):
            raise UsageError(f"unknown command: {argv[0]}")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except EvaluatorError as exc:
        print(f"evaluator error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
