"""Command line interface: train models, explain instances, evaluate
result files, run the staged demos, and launch the HTTP service.

Exit codes: 0 success, 1 invalid arguments, 2 infeasible CE model (the
conflicting criterion tags are printed), 3 I/O errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, learners
from .builder import CeConfig, ConfigError, InfeasibleError, generate
from .dataset import CoherenceError, ParseError, load_csv
from .demo import DEMOS, run_demo
from .evaluate import AggregateRow, MetricsReport, aggregate, format_table, score_set
from .schema import FeatureSchema, SchemaError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class UsageError(ValueError):
    pass


def build_parser() -> _Parser:
    parser = _Parser(prog="cemio", description="counterfactual explanations via MIO")
    parser.add_argument("--version", action="version", version=f"cemio {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model on a CSV dataset")
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--schema", required=True)
    p_train.add_argument("--family", required=True, choices=learners.FAMILIES)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--hyperparams", default=None, help="JSON object")
    p_train.add_argument("--out", required=True)

    p_explain = sub.add_parser("explain", help="generate counterfactuals for an instance")
    p_explain.add_argument("--model", required=True)
    p_explain.add_argument("--data", required=True)
    p_explain.add_argument("--schema", required=True)
    p_explain.add_argument("--config", required=True, help="CE config JSON file")
    group = p_explain.add_mutually_exclusive_group(required=True)
    group.add_argument("--instance", type=int, help="training row index")
    group.add_argument("--instance-json", help="inline record or path to one")
    p_explain.add_argument("-m", type=int, default=None, help="override requested CE count")
    p_explain.add_argument("--out", default=None)

    p_eval = sub.add_parser("evaluate", help="aggregate metrics from explain result files")
    p_eval.add_argument("--results", nargs="+", required=True)

    p_demo = sub.add_parser("demo", help="run a staged criteria walkthrough")
    p_demo.add_argument("--name", required=True, choices=DEMOS)
    p_demo.add_argument("--instance", type=int, default=None)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--data", required=True)
    p_serve.add_argument("--schema", required=True)
    p_serve.add_argument("--port", type=int, default=8080)
    p_serve.add_argument("--host", default="127.0.0.1")
    return parser


def _load_dataset(args):
    schema = FeatureSchema.from_json(Path(args.schema))
    return load_csv(args.data, schema)


def _cmd_train(args) -> int:
    dataset = _load_dataset(args)
    hyper = json.loads(args.hyperparams) if args.hyperparams else None
    model = learners.train(dataset, args.family, hyper, seed=args.seed)
    learners.save(model, args.out)
    print(f"trained {args.family} on {len(dataset)} rows, "
          f"train accuracy {model.train_accuracy:.3f}, saved to {args.out}")
    return EXIT_OK


def _render_ce_table(result, dataset) -> str:
    from .demo import render_part_table
    return render_part_table(result.factual, result, dataset)


def _cmd_explain(args) -> int:
    dataset = _load_dataset(args)
    model = learners.load(args.model)
    config = CeConfig.from_json(Path(args.config).read_text())
    if args.m is not None:
        config.m = args.m
    if args.instance is not None:
        if not 0 <= args.instance < len(dataset):
            raise UsageError(f"instance index {args.instance} out of range")
        factual = dict(dataset.rows[args.instance])
    else:
        text = args.instance_json
        try:
            if Path(text).exists():
                text = Path(text).read_text()
        except OSError:
            pass  # inline JSON longer than a legal path
        factual = json.loads(text)

    result = generate(factual, model, dataset, config)
    metrics = None
    if result.counterfactuals:
        metrics = score_set(factual, [ce.record for ce in result.counterfactuals],
                            model, dataset, config.target_label)
    print(_render_ce_table(result, dataset))
    if metrics:
        agg = aggregate([metrics])
        print(format_table({"explain": agg}))
    for w in result.warnings:
        print(f"note: {w}", file=sys.stderr)
    if args.out:
        doc = result.to_dict()
        doc["metrics"] = metrics.to_dict() if metrics else None
        doc["engine_version"] = __version__
        Path(args.out).write_text(json.dumps(doc, indent=2))
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    reports = []
    for path in args.results:
        doc = json.loads(Path(path).read_text())
        m = doc.get("metrics")
        if m is None:
            print(f"note: {path} has no metrics block, skipped", file=sys.stderr)
            continue
        m = {k: v for k, v in m.items()}
        reports.append(MetricsReport(
            validity=m["validity"], sparsity=m["sparsity"],
            cat_proximity=m.get("cat_proximity"), cont_proximity=m["cont_proximity"],
            cat_diversity=m.get("cat_diversity"), cont_diversity=m.get("cont_diversity"),
            count_diversity=m.get("count_diversity"),
            n_counterfactuals=m.get("n_counterfactuals", 1)))
    if not reports:
        raise UsageError("no result files with metrics")
    print(format_table({"aggregate": aggregate(reports)}))
    return EXIT_OK


def _cmd_demo(args) -> int:
    run_demo(args.name, stream=sys.stdout, factual_index=args.instance)
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    dataset = _load_dataset(args)
    app = create_app(dataset)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


_COMMANDS = {
    "train": _cmd_train,
    "explain": _cmd_explain,
    "evaluate": _cmd_evaluate,
    "demo": _cmd_demo,
    "serve": _cmd_serve,
}


def cli_main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, SchemaError, learners.TrainingError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"infeasible: conflicting criteria {exc.tags}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ParseError, CoherenceError, FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
