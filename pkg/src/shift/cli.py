"""Command-line front door: ``shift <subcommand>``.

Exit codes: 0 on success, 1 on engine errors (one JSON error line on
stderr), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from shift.errors import ShiftError

log = logging.getLogger("shift")

RESULT_SCHEMA = "shift.execution/v1"


class UsageError(Exception):
    pass


def _load_samples(path: str):
    from shift.readers import SampleSource

    p = Path(path)
    if p.suffix == ".npz":
        data = np.load(p)
        return SampleSource(data["X"], data["y"])
    return SampleSource.from_file(p)


def _kv(items, what: str) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"{what} expects NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k] = v
    return out


def _engine(args):
    from shift.config import load_config
    from shift.engine import Engine

    overrides = {}
    if args.catalog:
        overrides["catalog"] = {"path": args.catalog}
    cfg = load_config(args.config, overrides)
    return Engine.from_config(cfg), cfg


def _query_overrides(args) -> dict:
    out = {}
    if getattr(args, "force_mode", None):
        out["force_mode"] = args.force_mode
    for name in ("budget", "chunk_size", "seed"):
        value = getattr(args, name, None)
        if value is not None:
            out[name] = value
    if getattr(args, "no_cache", False):
        out["use_cache"] = False
    return out


# -- subcommands ----------------------------------------------------------


def cmd_register_model(args, out) -> int:
    from shift.catalog import ModelRecord

    engine, _ = _engine(args)
    if args.json:
        record = ModelRecord.from_dict(json.loads(Path(args.json).read_text()))
    else:
        if not args.id or args.feature_dim is None:
            raise UsageError("register-model needs --json or both --id and --feature-dim")
        spec = json.loads(args.extractor) if args.extractor else {}
        record = ModelRecord(
            model_id=args.id, feature_dim=args.feature_dim, per_sample_inference_cost=args.inference_cost,
            load_cost=args.load_cost, source=args.source, input_modality=args.input, n_params=args.n_params,
            upstream_accuracy=args.upstream_accuracy, extractor_spec=spec,
        )
    engine.catalog.register_model(record)
    print(record.model_id, file=out)
    return 0


def cmd_register_reader(args, out) -> int:
    from shift.readers import Delta, distribute_added_samples, read_change

    engine, _ = _engine(args)
    catalog = engine.catalog
    kwargs = {"modality": args.modality, "type_tag": args.type, "n_classes": args.n_classes}
    if args.samples:
        record = catalog.register_reader(args.id, _load_samples(args.samples), **kwargs)
    elif args.change or args.add:
        if not args.parent:
            raise UsageError("--change/--add need --parent")
        if args.change:
            idx, X, y = read_change(args.change)
            delta = Delta("change", _source(X, y), indices=idx)
        else:
            src = _load_samples(args.add)
            plan = None
            if args.buckets:
                plan = distribute_added_samples(args.buckets, len(src), args.seed, args.bucket_chunk)
            delta = Delta("add", src, plan=plan)
        record = catalog.derive_reader(args.id, args.parent, delta, **kwargs)
    else:
        raise UsageError("register-reader needs --samples, --change or --add")
    print(json.dumps(record.to_dict(), sort_keys=True), file=out)
    return 0


def _source(X, y):
    from shift.readers import SampleSource

    return SampleSource(X, y)


def cmd_record_result(args, out) -> int:
    engine, _ = _engine(args)
    engine.catalog.record_benchmark_result(args.model, args.reader, args.accuracy, args.wall_time)
    return 0


def _query_text(args) -> str:
    if args.expr and args.file:
        raise UsageError("give either -e or --file, not both")
    if args.expr:
        return args.expr
    if args.file:
        return Path(args.file).read_text()
    raise UsageError("query needs -e TEXT or --file PATH")


def _print_result(result, as_json: bool, out) -> None:
    if as_json:
        print(json.dumps({"schema": RESULT_SCHEMA, **result.to_dict()}, sort_keys=True), file=out)
        return
    print(f"{'rank':>4}  {'id':<24} score", file=out)
    for i, mid in enumerate(result.ranking, start=1):
        score = result.scores.get(mid)
        shown = "" if score is None else f"{score:.6g}"
        print(f"{i:>4}  {mid:<24} {shown}", file=out)
    tasks = result.report["tasks"]
    print(
        f"-- {result.execution_id}  tasks: {tasks['inference']} inference, {tasks['proxy']} proxy, "
        f"{tasks['datasim']} datasim; cache hit rate {result.report['cache']['hit_rate']:.0%}; "
        f"{result.report['wall_time_ms']:.1f} ms",
        file=out,
    )
    for w in result.report["warnings"]:
        print(f"-- warning: {w}", file=out)


def cmd_query(args, out) -> int:
    from shift.incremental import incremental_execute
    from shift.readers import Delta, read_change

    engine, _ = _engine(args)
    text = _query_text(args)
    bindings = _kv(args.bind, "--bind")
    overrides = _query_overrides(args)
    if args.incremental:
        if not args.prior:
            raise UsageError("--incremental needs --prior EXECUTION_ID")
        deltas = {}
        for name, path in _kv(args.change, "--change").items():
            idx, X, y = read_change(path)
            deltas[name] = Delta("change", _source(X, y), indices=idx)
        result = incremental_execute(engine, text, args.prior, deltas, bindings=bindings, **overrides)
    else:
        result = engine.execute(text, bindings=bindings, **overrides)
    _print_result(result, args.json, out)
    return 0


def cmd_bench(args, out) -> int:
    from shift.bench import evaluate_strategy, random_baseline, target_accuracies, write_csv

    engine, _ = _engine(args)
    targets = [t for t in args.targets.split(",") if t]
    # --budget here is the size of the returned model set, not the SH pull budget
    overrides = {k: v for k, v in _query_overrides(args).items() if k != "budget"}
    reports = []
    for path in args.strategies:
        text = Path(path).read_text()
        for target in targets:
            reports.append(evaluate_strategy(engine, text, target, args.budget, strategy=Path(path).stem,
                                             **overrides))
    for rep in reports:
        print(f"{rep.strategy:<16} {rep.target:<12} regret={rep.regret:.4f} returned={' '.join(rep.returned)}",
              file=out)
    if args.random_trials:
        for target in targets:
            stats = random_baseline(target_accuracies(engine.catalog, target), args.budget, args.random_trials,
                                    args.seed or 0)
            print(f"{'random':<16} {target:<12} regret min={stats.min:.4f} mean={stats.mean:.4f} "
                  f"max={stats.max:.4f}", file=out)
    if args.out:
        write_csv(reports, args.out)
    return 0


def cmd_seed_demo(args, out) -> int:
    from shift.synthetic import benchmark_catalog, seed_catalog

    engine, _ = _engine(args)
    if args.benchmark:
        info = benchmark_catalog(engine.catalog, M=args.models, seed=args.seed or 0)
        print(f"registered {len(info['models'])} models and datasets {', '.join(info['datasets'])}", file=out)
    else:
        info = seed_catalog(engine.catalog, M=args.models, seed=args.seed or 0)
        print(f"registered {len(info['models'])} models, TrainReader and TestReader", file=out)
    return 0


def cmd_serve(args, out) -> int:
    import uvicorn

    from shift.http import create_app

    engine, cfg = _engine(args)
    host = args.host or cfg["server"]["host"]
    port = args.port or cfg["server"]["port"]
    uvicorn.run(create_app(engine), host=host, port=port, log_level="info")
    return 0


# -- parser ---------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (default: $SHIFT_CONFIG)")
    common.add_argument("--catalog", help="catalog directory (overrides catalog.path)")

    p = _Parser(prog="shift", description="Model search over a catalog of pre-trained models.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("register-model", parents=[common], help="register a model")
    s.add_argument("--json", help="model record as a JSON file")
    s.add_argument("--id")
    s.add_argument("--feature-dim", type=int)
    s.add_argument("--inference-cost", type=float, default=1.0, help="ms per sample")
    s.add_argument("--load-cost", type=float, default=0.0, help="ms")
    s.add_argument("--source", default="synthetic")
    s.add_argument("--input", default="Vision")
    s.add_argument("--n-params", type=int, default=0)
    s.add_argument("--upstream-accuracy", type=float)
    s.add_argument("--extractor", help="extractor spec as inline JSON")
    s.set_defaults(fn=cmd_register_model)

    s = sub.add_parser("register-reader", parents=[common], help="register a data reader")
    s.add_argument("id")
    s.add_argument("--samples", help=".shfr or .npz (X, y) file")
    s.add_argument("--parent")
    s.add_argument("--change", help="change-reader container file")
    s.add_argument("--add", help="samples to append")
    s.add_argument("--buckets", type=int, help="spread added samples over this many buckets")
    s.add_argument("--bucket-chunk", type=int, help="bucket size the spread refers to")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--modality", default="Vision")
    s.add_argument("--type", default="")
    s.add_argument("--n-classes", type=int)
    s.set_defaults(fn=cmd_register_reader)

    s = sub.add_parser("record-result", parents=[common], help="record a fine-tune accuracy")
    s.add_argument("model")
    s.add_argument("reader")
    s.add_argument("accuracy", type=float)
    s.add_argument("--wall-time", type=float, help="ms")
    s.set_defaults(fn=cmd_record_result)

    s = sub.add_parser("query", parents=[common], help="run a ShiftQL query")
    s.add_argument("-e", "--expr", help="query text")
    s.add_argument("--file", help="query file")
    s.add_argument("--json", action="store_true", help="print the result as JSON")
    s.add_argument("--bind", action="append", metavar="NAME=READER", help="bind a reader name")
    s.add_argument("--force-mode", choices=("auto", "plain", "sh"))
    s.add_argument("--budget", type=int)
    s.add_argument("--chunk-size", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--no-cache", action="store_true")
    s.add_argument("--incremental", action="store_true")
    s.add_argument("--prior", help="execution id of the prior run")
    s.add_argument("--change", action="append", metavar="NAME=FILE", help="change-reader delta for a reader")
    s.set_defaults(fn=cmd_query)

    s = sub.add_parser("bench", parents=[common], help="leave-one-dataset-out regret benchmark")
    s.add_argument("--targets", required=True, help="comma-separated target readers")
    s.add_argument("--strategies", nargs="+", required=True, help="query files, one strategy each")
    s.add_argument("--budget", type=int, required=True)
    s.add_argument("--out", help="CSV report path")
    s.add_argument("--random-trials", type=int, default=0)
    s.add_argument("--seed", type=int)
    s.add_argument("--force-mode", choices=("auto", "plain", "sh"))
    s.set_defaults(fn=cmd_bench)

    s = sub.add_parser("seed-demo", parents=[common], help="register a synthetic demo catalog")
    s.add_argument("--models", type=int, default=6)
    s.add_argument("--benchmark", action="store_true", help="multi-dataset catalog with planted results")
    s.add_argument("--seed", type=int)
    s.set_defaults(fn=cmd_seed_demo)

    s = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    s.add_argument("--host")
    s.add_argument("--port", type=int)
    s.set_defaults(fn=cmd_serve)
    return p


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(json.dumps({"error": "UsageError", "message": str(exc)}), file=err)
        return 2
    try:
        return args.fn(args, out)
    except UsageError as exc:
        print(json.dumps({"error": "UsageError", "message": str(exc)}), file=err)
        return 2
    except ShiftError as exc:
        body = exc.to_dict()
        print(json.dumps({"error": body.pop("kind"), **body}, default=str), file=err)
        return 1
    except (OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=err)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
