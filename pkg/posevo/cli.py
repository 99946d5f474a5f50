"""Command-line entry point.

Commands:
    estimate      fit a skeleton to a cloud or depth image with the evolutionary search
    baseline      same inputs and outputs, hill climbing instead
    synth         render a synthetic benchmark with ground truth
    eval          score result pose files against a benchmark's ground truth
    bench-report  run both optimizers over a benchmark and summarize the comparison

Exit codes: 0 success, 1 input/output or parse error, 2 invalid configuration
or usage.
"""

import argparse
import csv
import logging
import sys
import typing as _t
from pathlib import Path

import numpy as np
import pydantic

from . import __version__
from . import config as _config
from . import depthio as _depthio
from . import errors as _errors
from . import evolution as _evolution
from . import export as _export
from . import objective as _objective
from . import options as _options
from . import skeleton as _skeleton
from . import stats as _stats
from . import syntheval as _syntheval

logger = logging.getLogger("posevo")

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2

# EAConfig field -> (flags, type, help)
_CONFIG_FLAGS: dict[str, tuple[tuple[str, ...], type, str]] = {
    "population_size": (("--population-size",), int, "individuals per generation, >= 1 (default 200)"),
    "elite_count": (("--elite-count",), int, "elites kept per generation, 0 <= n < population (default 2)"),
    "tournament_size": (("--tournament-size",), int, "tournament size, 1..population (default 3)"),
    "crossover_probability": (("--crossover-probability",), float, "crossover probability in [0, 1] (default 0.5)"),
    "mutation_rate": (("--mutation-rate",), float, "per-parameter mutation probability in [0, 1] (default 3/dof)"),
    "mutation_scale": (("--mutation-scale",), float, "mutation std as a fraction of parameter range, >= 0 (default 0.1)"),
    "eval_budget": (("--budget", "--eval-budget"), int, "objective evaluations, >= population (default 100000)"),
    "seed": (("--seed",), int, "random seed in [0, 2^64) (default 0)"),
    "restart_after": (("--restart-after",), int, "hill-climbing rejections before a restart, >= 1 (default 500)"),
    "box_padding": (("--box-padding",), float, "meters added around the cloud for the root position, >= 0 (default 0.05)"),
    "workers": (("--workers",), int, "threads for population evaluation, >= 1 (default 1)"),
    "target_value": (("--target-value",), float, "stop at this objective value, >= 0 (default 0)"),
}


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {value}")
    return value


def _non_negative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected an integer >= 0, got {value}")
    return value


def _non_negative_float(text: str) -> float:
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"expected a number >= 0, got {value}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a number > 0, got {value}")
    return value


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("optimizer configuration (overrides --config)")
    group.add_argument("--config", type=Path, help="key = value configuration file")
    for field, (flags, kind, text) in _CONFIG_FLAGS.items():
        group.add_argument(*flags, dest=field, type=kind, default=None, help=text)


def _config_from_args(args: argparse.Namespace) -> _config.EAConfig:
    overrides = {field: getattr(args, field) for field in _CONFIG_FLAGS}
    return _config.load_config(args.config, overrides)


def _load_skeleton(reference: str) -> _skeleton.Skeleton:
    """Skeleton from a file path, or a builtin name when no such file exists."""
    path = Path(reference)
    if not path.exists() and reference in _skeleton.builtin_skeleton_names():
        return _skeleton.builtin_skeleton(reference)
    return _skeleton.load_skeleton(path)


def _load_cloud(args: argparse.Namespace) -> _objective.PointCloud:
    if args.cloud is not None:
        cloud = _depthio.load_xyz(args.cloud)
    else:
        image = _depthio.load_depth(args.depth)
        mask = _depthio.background_subtract(image, args.far_mm)
        cloud = _depthio.to_point_cloud(image, mask)
    if args.sigma is not None:
        cloud = cloud.with_sigma(args.sigma)
    logger.info("cloud: %d points, sigma %.6g m", len(cloud), cloud.sigma)
    return cloud


def stats_path_for(out: Path) -> Path:
    """Stats CSV path next to a pose file: x.pose.json -> x.stats.csv."""
    name = out.name
    if name.endswith(".pose.json"):
        return out.with_name(name[: -len(".pose.json")] + ".stats.csv")
    return out.with_suffix(".stats.csv")


def _fit(args: argparse.Namespace, optimizer: _options.Optimizer) -> int:
    cfg = _config_from_args(args)
    skeleton = _load_skeleton(args.skeleton)
    cloud = _load_cloud(args)
    result = _evolution.optimize(optimizer, skeleton, cloud, cfg)
    pose_file = _export.pose_file_from_result(skeleton, result, cloud, cfg.seed)
    out = Path(args.out)
    _export.write_pose_file(pose_file, out)
    _export.write_stats_csv(result.stats, args.stats or stats_path_for(out))
    if args.export_ply is not None:
        model = _skeleton.forward_kinematics(skeleton, result.best)
        _export.export_ply(args.export_ply, cloud, model)
    logger.info("wrote %s (objective %.6g)", out, pose_file.objective)
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace) -> int:
    return _fit(args, _options.Optimizer.EVOLVE)


def cmd_baseline(args: argparse.Namespace) -> int:
    return _fit(args, _options.Optimizer.HILL_CLIMB)


def cmd_synth(args: argparse.Namespace) -> int:
    skeleton = _load_skeleton(args.skeleton)
    manifest = _syntheval.make_benchmark(
        skeleton,
        args.poses,
        args.views,
        args.seed,
        args.outdir,
        noise_mm=args.noise,
        distance=args.distance,
    )
    print(f"{len(manifest)} cases written to {Path(args.outdir) / 'manifest.txt'}")
    return EXIT_OK


def result_path_for(results: Path, case: _syntheval.BenchmarkCase) -> Path:
    return results / f"{case.name}.pose.json"


def _model_from_pose_file(pose_file: _export.PoseFile) -> _skeleton.PosedModel:
    endpoints = pose_file.endpoints
    return _skeleton.PosedModel(
        tuple(e.link_id for e in endpoints),
        np.array([e.start for e in endpoints]).reshape(-1, 3),
        np.array([e.end for e in endpoints]).reshape(-1, 3),
        np.ones(len(endpoints)),
    )


def score_pose_file(
    estimate: _export.PoseFile,
    truth: _export.PoseFile,
    threshold_fraction: float,
    symmetry_groups: _t.Sequence[_t.Sequence[_t.Sequence[int]]] = (),
) -> _syntheval.AccuracyReport:
    """Accuracy of a result file against a ground-truth file."""
    truth_model = _model_from_pose_file(truth)
    threshold = _syntheval.default_threshold(truth_model, threshold_fraction)
    return _syntheval.link_accuracy(
        _model_from_pose_file(estimate),
        truth_model,
        threshold,
        symmetry_groups=symmetry_groups,
    )


def _symmetry_for(args: argparse.Namespace) -> _t.Sequence[_t.Sequence[_t.Sequence[int]]]:
    mode = _options.AccuracyMode(args.mode)
    if mode is _options.AccuracyMode.STRICT:
        return ()
    if args.skeleton is None:
        raise _errors.ConfigError({"--skeleton": "required for best-permutation mode"})
    return _load_skeleton(args.skeleton).symmetry_groups


def cmd_eval(args: argparse.Namespace) -> int:
    manifest = _syntheval.read_manifest(args.manifest)
    groups = _symmetry_for(args)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["case", "status", "fraction_correct", "threshold_m", "max_endpoint_error_m"])
    fractions = []
    missing = 0
    for case in manifest:
        result_path = result_path_for(Path(args.results), case)
        if not result_path.exists():
            missing += 1
            writer.writerow([case.name, "MISSING", "", "", ""])
            continue
        report = score_pose_file(
            _export.read_pose_file(result_path),
            _export.read_pose_file(case.truth),
            args.threshold,
            groups,
        )
        fractions.append(report.fraction_correct)
        writer.writerow(
            [
                case.name,
                "OK",
                f"{report.fraction_correct:.6f}",
                f"{report.threshold:.6g}",
                f"{float(report.endpoint_errors.max()):.6g}",
            ]
        )
    mean = f"{float(np.mean(fractions)):.6f}" if fractions else ""
    writer.writerow(["MEAN", f"{len(fractions)}/{len(manifest)}", mean, "", ""])
    if missing:
        logger.warning("%d of %d cases have no result file", missing, len(manifest))
    return EXIT_OK


def _write_runs(handle: _t.TextIO, runs: list[dict[str, _t.Any]]) -> None:
    writer = csv.DictWriter(handle, fieldnames=list(runs[0]), lineterminator="\n")
    writer.writeheader()
    for row in runs:
        writer.writerow({k: f"{v:.6g}" if isinstance(v, float) else v for k, v in row.items()})


def cmd_bench_report(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    skeleton = _load_skeleton(args.skeleton)
    manifest = _syntheval.read_manifest(args.manifest)
    outdir = Path(args.outdir)
    seeds = args.seeds if args.seeds else [cfg.seed]
    runs = []
    for case in manifest:
        cloud = _depthio.load_xyz(case.cloud)
        truth = _export.read_pose_file(case.truth)
        for seed in seeds:
            row: dict[str, _t.Any] = {"case": case.name, "seed": seed}
            for optimizer in _options.Optimizer:
                run_cfg = cfg.model_copy(update={"seed": seed})
                result = _evolution.optimize(optimizer, skeleton, cloud, run_cfg)
                pose_file = _export.pose_file_from_result(skeleton, result, cloud, seed)
                folder = outdir / optimizer.value / f"seed_{seed}"
                folder.mkdir(parents=True, exist_ok=True)
                out = result_path_for(folder, case)
                _export.write_pose_file(pose_file, out)
                _export.write_stats_csv(result.stats, stats_path_for(out))
                strict = score_pose_file(pose_file, truth, args.threshold)
                best = score_pose_file(pose_file, truth, args.threshold, skeleton.symmetry_groups)
                key = optimizer.name.lower()
                row[f"{key}_objective"] = pose_file.objective
                row[f"{key}_accuracy"] = strict.fraction_correct
                row[f"{key}_accuracy_best"] = best.fraction_correct
                row[f"{key}_elitism_violations"] = result.stats.elitism_violations()
            runs.append(row)
            logger.info(
                "%s seed %d: evolve %.4g, hill-climb %.4g",
                case.name, seed, row["evolve_objective"], row["hill_climb_objective"],
            )

    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "runs.csv", "w", newline="", encoding="utf-8") as f:
        _write_runs(f, runs)
    _write_runs(sys.stdout, runs)

    comparison = _stats.compare_runs(
        [r["evolve_objective"] for r in runs], [r["hill_climb_objective"] for r in runs]
    )
    summary = {
        "runs": len(runs),
        "evolve_median_accuracy": np.median([r["evolve_accuracy"] for r in runs]),
        "evolve_median_accuracy_best_permutation": np.median(
            [r["evolve_accuracy_best"] for r in runs]
        ),
        "hill_climb_median_accuracy": np.median([r["hill_climb_accuracy"] for r in runs]),
        "hill_climb_median_accuracy_best_permutation": np.median(
            [r["hill_climb_accuracy_best"] for r in runs]
        ),
        "evolve_median_objective": comparison.median_first,
        "hill_climb_median_objective": comparison.median_second,
        "evolve_wins": comparison.wins,
        "ties": comparison.ties,
        "elitism_violations": sum(
            r["evolve_elitism_violations"] + r["hill_climb_elitism_violations"] for r in runs
        ),
    }
    print()
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["metric", "value"])
    for key, value in summary.items():
        writer.writerow([key, f"{float(value):.6g}"])
    return EXIT_OK


def _add_fit_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--skeleton", required=True, help="skeleton spec file or builtin name")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--cloud", type=Path, help=".xyz point cloud in meters")
    source.add_argument("--depth", type=Path, help="16-bit PGM depth image with .intr sidecar")
    parser.add_argument(
        "--far-mm", type=_positive_float, default=4000.0,
        help="background far plane for --depth in millimeters, > 0 (default 4000)",
    )
    parser.add_argument(
        "--sigma", type=_positive_float, default=None,
        help="override the cloud's sigma statistic in meters, > 0",
    )
    parser.add_argument("--out", type=Path, required=True, help="pose file to write (JSON)")
    parser.add_argument("--stats", type=Path, help="stats CSV (default: next to --out)")
    parser.add_argument("--export-ply", type=Path, help="also write cloud + model as PLY")
    _add_config_flags(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posevo",
        description="Pose estimation of arbitrary kinematic skeletons from a single depth image.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    commands = parser.add_subparsers(dest="command", required=True)

    estimate = commands.add_parser("estimate", help="fit with the evolutionary search")
    _add_fit_arguments(estimate)
    estimate.set_defaults(handler=cmd_estimate)

    baseline = commands.add_parser("baseline", help="fit with hill climbing")
    _add_fit_arguments(baseline)
    baseline.set_defaults(handler=cmd_baseline)

    synth = commands.add_parser("synth", help="render a synthetic benchmark")
    synth.add_argument("--skeleton", required=True, help="skeleton spec file or builtin name")
    synth.add_argument("--poses", type=_positive_int, default=4, help="random poses, >= 1 (default 4)")
    synth.add_argument("--views", type=_positive_int, default=5, help="views per pose, >= 1 (default 5)")
    synth.add_argument("--seed", type=_non_negative_int, default=0, help="random seed (default 0)")
    synth.add_argument(
        "--noise", type=_non_negative_float, default=0.0,
        help="depth noise std in millimeters, >= 0 (default 0)",
    )
    synth.add_argument(
        "--distance", type=_positive_float, default=None,
        help="camera distance in meters, > 0 (default from skeleton size)",
    )
    synth.add_argument("--outdir", type=Path, required=True, help="output folder")
    synth.set_defaults(handler=cmd_synth)

    evaluate = commands.add_parser("eval", help="score result pose files")
    evaluate.add_argument("--manifest", type=Path, required=True, help="benchmark manifest")
    evaluate.add_argument("--results", type=Path, required=True, help="folder of <case>.pose.json files")
    evaluate.add_argument(
        "--threshold", type=_positive_float, default=_syntheval.DEFAULT_THRESHOLD_FRACTION,
        help="correctness threshold as a fraction of mean link length, > 0 (default 0.25)",
    )
    evaluate.add_argument(
        "--mode", choices=[m.value for m in _options.AccuracyMode],
        default=_options.AccuracyMode.STRICT.value, help="link matching (default strict)",
    )
    evaluate.add_argument("--skeleton", help="skeleton providing symmetry groups")
    evaluate.set_defaults(handler=cmd_eval)

    report = commands.add_parser("bench-report", help="compare both optimizers on a benchmark")
    report.add_argument("--manifest", type=Path, required=True, help="benchmark manifest")
    report.add_argument("--skeleton", required=True, help="skeleton spec file or builtin name")
    report.add_argument(
        "--seeds", type=_non_negative_int, nargs="+", help="seeds to run (default: --seed)"
    )
    report.add_argument("--outdir", type=Path, required=True, help="folder for result files")
    report.add_argument(
        "--threshold", type=_positive_float, default=_syntheval.DEFAULT_THRESHOLD_FRACTION,
        help="correctness threshold as a fraction of mean link length, > 0 (default 0.25)",
    )
    _add_config_flags(report)
    report.set_defaults(handler=cmd_bench_report)
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )


def main(argv: _t.Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args)
    try:
        return args.handler(args)
    except _errors.ConfigError as e:
        print(f"posevo: error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ImportError, ValueError, _errors.PosevoError, pydantic.ValidationError) as e:
        print(f"posevo: error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
