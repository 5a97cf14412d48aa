"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data/model error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys

from .dataset import DataMatrix, FeatureKind, load_csv
from .exceptions import DataError, NumericalError, UnknownFeature
from .harness import scenarios
from .harness.report import report_to_csv, report_to_markdown, timing_to_csv, timing_to_markdown
from .harness.synthetic import generate_synthetic
from .models import ModelSpec, fit_model
from .shapley import EstimatorConfig, Mode, estimate_all, estimate_coalition, estimate_single, estimates_to_csv

logger = logging.getLogger("mccshap")

PRESETS = {
    "scenario1": scenarios.scenario1_preset,
    "scenario2": scenarios.scenario2_preset,
    "combination-clone": scenarios.combination_clone_preset,
    "combination-real": scenarios.combination_real_preset,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _split(value):
    return [v.strip() for v in value.split(",") if v.strip()] if value else []


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--data", help="input CSV (header row required)")
    common.add_argument("--target", help="target column")
    common.add_argument("--instance", type=int, help="row index of the instance to explain")
    common.add_argument("--feature", help="feature of interest")
    common.add_argument("--features", help="comma-separated feature list")
    common.add_argument("--categorical", help="comma-separated columns holding encoded categories")
    common.add_argument("--model", help="linear | logistic | tree | forest | knn")
    common.add_argument("--model-opt", action="append", default=[], metavar="KEY=VALUE",
                        help="model hyperparameter (repeatable)")
    common.add_argument("--iterations", type=int, default=10_000, help="Monte-Carlo iterations M")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--mode", choices=("mcc", "nmcc", "both"), default="both")
    common.add_argument("--workers", type=int, default=1, help="threads per estimate (results unchanged)")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("csv", "md"), default="csv")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="mccshap", description="Multicollinearity-corrected Monte-Carlo Shapley values")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    sub.add_parser("explain", parents=[common], help="per-feature values for one instance")
    sub.add_parser("explain-group", parents=[common], help="joint value of a feature coalition")
    p = sub.add_parser("scenario1", parents=[common], help="clone experiment on one feature")
    p.add_argument("--clone-noise", type=float, default=0.0)
    sub.add_parser("scenario2", parents=[common],
                   help="feature of interest (--feature) vs. correlated set (--features)")
    p = sub.add_parser("combination", parents=[common], help="coalition NMCC vs. MCC")
    p.add_argument("--clones", action="store_true", help="add one clone per coalition member")
    p.add_argument("--clone-noise", type=float, default=0.0)
    p = sub.add_parser("bench", parents=[common], help="NMCC vs. MCC wall-clock")
    p.add_argument("--widths", default="10,100,1000")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--rows", type=int, default=300)
    p = sub.add_parser("synth", parents=[common], help="write a synthetic CSV")
    p.add_argument("--preset", choices=sorted(PRESETS), default="scenario1")
    p.add_argument("--rows", type=int)
    return parser


def _load(args, preset=None) -> DataMatrix:
    if args.data:
        schema = {c: FeatureKind.ENCODED_CATEGORICAL.value for c in _split(args.categorical)}
        return load_csv(args.data, schema)
    if preset is None:
        raise UsageError("--data is required")
    if args.target is None:
        args.target = "y"
    return generate_synthetic(PRESETS[preset](seed=0))


def _model_specs(args, default=scenarios.DEFAULT_MODELS):
    if args.model is None:
        if default is None:
            raise UsageError("--model is required")
        return list(default)
    return [ModelSpec.parse(args.model, args.model_opt)]


def _require(args, *names):
    for name in names:
        if getattr(args, name) in (None, ""):
            raise UsageError(f"--{name.replace('_', '-')} is required for {args.command}")


def _modes(args):
    return [Mode.NMCC, Mode.MCC] if args.mode == "both" else [Mode(args.mode)]


def _instance(args, X):
    i = 0 if args.instance is None else args.instance
    if not 0 <= i < X.n:
        raise UsageError(f"--instance {i} out of range [0, {X.n})")
    return i


def _explain_markdown(estimates, names, i):
    lines = [f"## explain (instance {i})", "", "| Target | Mode | Value | Std. error | M | Seed |",
             "|---|---|---|---|---|---|"]
    for e in estimates:
        lines.append(f"| {e.target_label(names)} | {e.mode.value} | {e.value:.6g} | "
                     f"{e.std_error:.3g} | {e.iterations} | {e.seed} |")
    return "\n".join(lines) + "\n"


def cmd_explain(args, group=False):
    _require(args, "data", "target")
    data = _load(args)
    X, _ = data.split_target(args.target)
    spec = ModelSpec.parse(args.model, args.model_opt) if args.model else ModelSpec("forest")
    f = fit_model(spec, data, args.target)
    i = _instance(args, X)
    x = X.values[i]
    out = []
    for mode in _modes(args):
        config = EstimatorConfig(X, args.iterations, args.seed, mode, args.workers)
        if group:
            out.append(estimate_coalition(f, config, x, [X.feature_names[X.index(c)] for c in _split(args.features)]))
        elif args.feature:
            out.append(estimate_single(f, config, x, X.index(args.feature)))
        else:
            for e in estimate_all(f, config, x):
                if e.error:
                    logger.warning("%s (%s): %s", X.feature_names[e.target[0]], mode.value, e.error)
                out.append(e)
    if args.format == "md":
        return _explain_markdown(out, X.feature_names, i)
    return estimates_to_csv(out, X.feature_names, instance_id=i)


def _render(args, report):
    return report_to_markdown(report) if args.format == "md" else report_to_csv(report)


def cmd_scenario1(args):
    _require(args, "feature")
    data = _load(args, "scenario1")
    _require(args, "target")
    report = scenarios.run_scenario1(data, args.target, args.feature, _model_specs(args), args.iterations,
                                     args.seed, args.instance, args.clone_noise, args.workers)
    return _render(args, report)


def cmd_scenario2(args):
    _require(args, "feature", "features")
    data = _load(args, "scenario2")
    _require(args, "target")
    report = scenarios.run_scenario2(data, args.target, args.feature, _split(args.features), _model_specs(args),
                                     args.iterations, args.seed, args.instance, args.workers)
    return _render(args, report)


def cmd_combination(args):
    _require(args, "features")
    data = _load(args, "combination-clone" if args.clones else "combination-real")
    _require(args, "target")
    report = scenarios.run_combination(data, args.target, _split(args.features), _model_specs(args),
                                       args.iterations, args.seed, args.instance, args.clones,
                                       args.clone_noise, args.workers)
    return _render(args, report)


def cmd_bench(args):
    widths = [int(w) for w in _split(args.widths)]
    spec = ModelSpec.parse(args.model, args.model_opt) if args.model else None
    rows, estimates = scenarios.run_timing(widths, spec, args.iterations, args.seed, args.repeats,
                                           args.rows, args.workers)
    return timing_to_markdown(rows) if args.format == "md" else timing_to_csv(rows, estimates)


def cmd_synth(args):
    spec = PRESETS[args.preset](seed=args.seed)
    if args.rows:
        spec = type(spec)(**{**spec.__dict__, "n": args.rows})
    data = generate_synthetic(spec)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(data.feature_names)
    for row in data.values:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


COMMANDS = {
    "explain": cmd_explain,
    "explain-group": lambda a: cmd_explain(a, group=True),
    "scenario1": cmd_scenario1,
    "scenario2": cmd_scenario2,
    "combination": cmd_combination,
    "bench": cmd_bench,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        text = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except UnknownFeature as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except DataError as exc:
        print(f"data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
