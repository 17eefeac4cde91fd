"""Command-line entry point: ``amesbench <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import artifact, bench, config, data, metrics, schema as schema_mod


def _common(p, experiment=True):
    p.add_argument("--config", help="experiment config file")
    p.add_argument("--data", help="CSV file (overrides the config)")
    p.add_argument("--schema", help="schema file (default: bundled Ames schema)")
    if experiment:
        p.add_argument("--seed", type=int)
        p.add_argument("--folds", type=int)
        p.add_argument("--test-fraction", type=float, dest="test_fraction")
        p.add_argument("--out", help="output directory")
        p.add_argument("--models", help="comma list, e.g. linreg,boost")


def _config(args):
    cfg = config.load_config(args.config)
    models = tuple(m.strip() for m in args.models.split(",")) if getattr(args, "models", None) else None
    return cfg.with_overrides(data=args.data, schema=args.schema, seed=getattr(args, "seed", None),
                              folds=getattr(args, "folds", None),
                              test_fraction=getattr(args, "test_fraction", None),
                              output=getattr(args, "out", None), models=models)


def cmd_validate(args):
    cfg = _config(args)
    specs = schema_mod.load_schema(cfg.schema or None)
    table = data.load_csv(cfg.data_path(), specs)
    report = data.validate(table, specs)
    sys.stdout.write(report.to_text())
    return 0 if report.passed else 1


def _run(args, tuned):
    cfg = _config(args)
    result = bench.tune_and_run(cfg) if tuned else bench.run_experiment(cfg)
    written = bench.write_outputs(result, cfg.output)
    sys.stdout.write(result.report.to_text())
    for path in written:
        print(f"wrote {path}")
    return 1 if any(r.failed for r in result.report.rows) else 0


def cmd_train(args):
    return _run(args, tuned=False)


def cmd_tune(args):
    return _run(args, tuned=True)


def cmd_evaluate(args):
    art = artifact.load_model(args.artifact)
    enc = art.encoder
    if not args.data:
        raise SystemExit("evaluate needs --data with a labelled CSV")
    table = data.clean(data.load_csv(args.data, enc.schema), enc.schema, fills=enc.fills)
    X, warnings = enc.transform(table)
    y = enc.target(table)
    rep = metrics.full_report(y, art.predict(X), X.shape[1])
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"model {art.kind} on {table.n_rows} rows ({enc.target_transform} target)")
    for name in ("r2", "adj_r2", "mse", "rmse", "mae"):
        print(f"{name}\t{getattr(rep, name)!r}")
    return 0


def cmd_predict(args):
    if not (args.artifact and args.data and args.output):
        raise SystemExit("predict needs --artifact, --data and --output")
    bp = bench.predict_batch(args.artifact, args.data, args.output, args.schema)
    print(f"wrote {len(bp.ids)} predictions to {args.output}")
    for w in bp.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def cmd_report(args):
    path = Path(args.report) if args.report else Path(args.out or "out") / "report.json"
    sys.stdout.write(bench.report_from_json(path.read_text(encoding="utf-8")).to_text())
    return 0


def cmd_drift(args):
    golden = artifact.load_model(args.golden)
    candidate = bench.report_from_json(Path(args.report).read_text(encoding="utf-8"))
    threshold = args.threshold
    if threshold is None:
        threshold = config.load_config(args.config).drift_threshold
    result = bench.drift_check(golden, candidate, threshold)
    sys.stdout.write(result.to_text())
    return 0 if result.passed else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="amesbench", description="House-price regression benchmark.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log pipeline stages")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a CSV against the schema")
    _common(p, experiment=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("train", help="fit all models with default hyperparameters")
    _common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tune", help="grid-search every model, then fit and score the winners")
    _common(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("evaluate", help="score a saved model on a labelled CSV")
    p.add_argument("--artifact", required=True)
    p.add_argument("--data")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="batch predictions from a saved model")
    p.add_argument("--artifact", required=True)
    p.add_argument("--data", help="CSV rows to predict")
    p.add_argument("--schema", help="check the rows' schema against the artifact")
    p.add_argument("--output", help="predictions file")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("report", help="print the text table of a saved report")
    p.add_argument("--report", help="report.json path")
    p.add_argument("--out", help="run directory holding report.json")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("drift-check", help="compare a new report to the golden model")
    p.add_argument("--golden", required=True, help="golden model artifact")
    p.add_argument("--report", required=True, help="candidate report.json")
    p.add_argument("--threshold", type=float, help="allowed cv drop in points (default 2.0)")
    p.add_argument("--config")
    p.set_defaults(func=cmd_drift)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (bench.BenchError, data.DataError, config.ConfigError, artifact.ArtifactError,
            schema_mod.SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
