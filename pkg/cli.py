"""
Command-line entry points: simulate, extract, train, eval, fig2, plot.

Exit codes: 0 ok, 1 usage/config/schema error, 2 runtime error
(including any ValueError raised while a command runs).
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from typing import List, Optional

import numpy as np

import config
from classification import (
    baseline_models,
    cross_validate,
    format_comparison,
    train_model,
)
from dataset import (
    load_dataset,
    load_model,
    read_features,
    read_trace,
    save_model,
    write_dataset,
    write_features,
)
from errors import ConfigError, ETrollError, IntegrityError, SchemaMismatchError
from feature_extraction import assemble, feature_names
from plotting import plot_channels, plot_feature_matrix, plot_heatmap, plot_peak_markers
from procedure import fig2_experiment, plan_runs, process_runs


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

USAGE_ERRORS = (ConfigError, SchemaMismatchError, IntegrityError, FileNotFoundError)


class UsageError(Exception):
    """Bad command-line arguments."""


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def _shape_list(text: str) -> List[str]:
    shapes = [v.strip() for v in text.split(",") if v.strip()]
    unknown = [s for s in shapes if s not in config.SHAPES]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown object {unknown[0]!r}; choose from {', '.join(config.SHAPES)}")
    return shapes


def _check_channel_args(channels: Optional[List[int]], count: int) -> None:
    bad = [c for c in channels or [] if not 1 <= c <= count]
    if bad:
        raise UsageError(f"--channels: no sensor {bad[0]}; choose from 1..{count}")


def _out_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def cmd_simulate(args, settings: config.Settings) -> int:
    runs = plan_runs(args.objects, args.runs_per_object, args.seed, settings)
    if args.palm_mode == "fixed":
        runs = [replace(r, palm_mode="fixed", fixed_width=args.fixed_width) for r in runs]
    logger.info(f"Simulating {len(runs)} runs with {args.workers} worker(s)")
    results = process_runs(runs, args.workers)
    manifest = write_dataset(results, args.out, settings, args.seed, args.runs_per_object)

    ok = sum(1 for r in results if r['success'])
    print(f"Wrote {ok}/{len(results)} traces and {manifest}")
    return EXIT_OK if ok == len(results) else EXIT_RUNTIME


def cmd_extract(args, settings: config.Settings) -> int:
    traces = load_dataset(args.dataset)
    vectors = [assemble(trace, settings.features) for trace in traces]
    X = np.vstack([v.values for v in vectors]) if vectors else np.zeros((0, 0))
    channels = traces[0].pressures.shape[1] if traces else 0
    names = feature_names(channels, settings.features.peaks_per_channel)
    write_features(args.out, X, [v.label for v in vectors], names)
    print(f"Wrote {X.shape[0]}x{X.shape[1]} feature matrix to {args.out}")
    return EXIT_OK


def cmd_train(args, settings: config.Settings) -> int:
    X, y, _ = read_features(args.features)
    model = train_model(X, y, args.seed, settings.classification)
    save_model(model, args.out)
    print(f"Trained on {len(y)} samples, {model.pca.retained} components retained; wrote {args.out}")
    return EXIT_OK


def cmd_eval(args, settings: config.Settings) -> int:
    X, y, _ = read_features(args.features)
    c = settings.classification

    if args.model:
        model = load_model(args.model)
        accuracy = float(np.mean(model.predict(X) == y))
        print(f"Model {args.model} on {len(y)} samples: {100 * accuracy:.1f}%\n")

    report = cross_validate(X, y, c.folds, args.seed, c)
    print(f"Subspace KNN, {c.folds}-fold stratified cross-validation")
    print(report.format())
    print()

    reports = baseline_models(X, y, c.folds, args.seed, c)
    print(format_comparison(reports))

    if args.report:
        payload = {'subspace_knn': report.to_dict(),
                   'comparison': {name: r.to_dict() for name, r in reports.items()}}
        with open(args.report, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
    return EXIT_OK


def cmd_fig2(args, settings: config.Settings) -> int:
    result = fig2_experiment(args.diameter, args.fixed_width, settings)
    print(f"Object rotation, dynamic palm:  {result.rotation_dynamic:6.1f} deg")
    print(f"Object rotation, fixed palm:    {result.rotation_fixed:6.1f} deg  (w = {result.fixed_width:.1f} mm)")
    print(f"Rotation increase:              {result.rotation_increase:6.1f} %")
    print(f"Sensing arc, dynamic palm:      {result.arc_dynamic:6.1f} mm")
    print(f"Sensing arc, fixed palm:        {result.arc_fixed:6.1f} mm")
    print(f"Arc increase:                   {result.arc_increase:6.1f} %")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(result.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
    return EXIT_OK


def cmd_plot(args, settings: config.Settings) -> int:
    out = _out_dir(args.out)
    if args.features:
        X, y, _ = read_features(args.features)
        _check_channel_args(args.channels, X.shape[1] // (4 * settings.features.peaks_per_channel))
        plot_feature_matrix(X, y, os.path.join(out, "features.svg"), args.channels,
                            settings.features.peaks_per_channel)
        return EXIT_OK

    trace = read_trace(args.trace, settings.gripper.l_mid)
    stem = os.path.splitext(os.path.basename(args.trace))[0]
    times, pressures = trace.timestamps, trace.pressures
    _check_channel_args(args.channels, pressures.shape[1])
    plot_heatmap(times, pressures, os.path.join(out, f"{stem}_heatmap.svg"), title=trace.label)
    channels = args.channels or [1]
    plot_channels(times, pressures, channels, os.path.join(out, f"{stem}_channels.svg"),
                  (args.start, args.end), title=trace.label)
    for channel in channels:
        plot_peak_markers(times, pressures, channel, os.path.join(out, f"{stem}_peaks_s{channel}.svg"),
                          settings.features, title=f"{trace.label}, sensor {channel}")
    return EXIT_OK


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="etroll", description="Rolling-gripper tactile shape recognition simulator")
    parser.add_argument("--config", default=None,
                        help=f"YAML run-config file (default: ${config.CONFIG_ENV_VAR})")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    p = sub.add_parser("simulate", help="Generate a dataset of rolling traces")
    p.add_argument("--objects", type=_shape_list, default=list(config.SHAPES))
    p.add_argument("--runs-per-object", type=int, default=config.RUNS_PER_OBJECT)
    p.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    p.add_argument("--palm-mode", choices=["dynamic", "fixed"], default="dynamic")
    p.add_argument("--fixed-width", type=float, default=config.FIXED_PALM_WIDTH_MM)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="Output directory")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("extract", help="Feature matrix from a dataset")
    p.add_argument("--dataset", required=True, help="Dataset directory or manifest")
    p.add_argument("--out", required=True, help="Feature matrix CSV")
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("train", help="Train the subspace KNN model")
    p.add_argument("--features", required=True)
    p.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    p.add_argument("--out", required=True, help="Model JSON file")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="Cross-validate and compare classifiers")
    p.add_argument("--features", required=True)
    p.add_argument("--model", default=None, help="Trained model to score on the features")
    p.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    p.add_argument("--report", default=None, help="Write the evaluation as JSON")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("fig2", help="Dynamic versus fixed palm on a cylinder")
    p.add_argument("--diameter", type=float, default=config.OBJECT_INNER_DIAMETER_MM)
    p.add_argument("--fixed-width", type=float, default=config.FIXED_PALM_WIDTH_MM)
    p.add_argument("--out", default=None, help="Write the comparison as JSON")
    p.set_defaults(handler=cmd_fig2)

    p = sub.add_parser("plot", help="SVG plots of a trace or a feature matrix")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--trace")
    source.add_argument("--features")
    p.add_argument("--channels", type=_int_list, default=None, help="Comma-separated sensors, 1-based")
    p.add_argument("--start", type=float, default=18.0)
    p.add_argument("--end", type=float, default=32.0)
    p.add_argument("--out", required=True, help="Output directory")
    p.set_defaults(handler=cmd_plot)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        settings = config.load_settings(args.config)
        return args.handler(args, settings)
    except (UsageError, *USAGE_ERRORS) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ETrollError, OSError, ValueError) as e:
        logger.debug("Runtime failure", exc_info=True)
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == '__main__':
    sys.exit(main())
