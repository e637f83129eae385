"""Command-line interface.

Subcommands: simulate | ingest | train-model | slam | evaluate | sweep |
export-plot. Exit codes: 0 success, 2 configuration error, 3 data error,
4 solver non-convergence (outputs are still written).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import dataio, plotting
from .config import (
    PipelineConfig,
    build_config,
    config_to_dict,
    parse_override_value,
)
from .distance_model import SimilarityDistanceModel
from .errors import ConfigError, DataError
from .evaluation import (
    SweepCell,
    SweepResult,
    mean_position_error,
    odometry_report,
    render_sweep_table,
    rigid_align,
    run_sweep,
)
from .pipeline import (
    ingest_dataset,
    load_dataset,
    run_slam,
    train_model,
)
from .simulator import generate_dataset

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NO_CONVERGENCE = 4


def _parse_grid(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}: {exc}") from exc
    if not values:
        raise ConfigError(f"empty grid {text!r}")
    return values


def _parse_robots(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad robot list {text!r}: {exc}") from exc


def _collect_overrides(args) -> dict:
    """Map provided CLI flags onto dotted config keys."""
    mapping = {
        "sigma_r": "similarity.sigma_r",
        "sigma_tau": "similarity.sigma_tau",
        "measure": "similarity.measure",
        "tau_scale": "similarity.tau_scale",
        "nu_s": "loop.nu_s",
        "nu_p": "loop.nu_p",
        "min_separation": "loop.min_path_separation_m",
        "huber": "loop.huber_delta_m",
        "bin_width": "model_r",
        "max_path_m": "model_max_path_m",
        "window_s": "window_s",
        "min_aps": "min_aps",
        "threads": "threads",
        "n_robots": "simulation.n_robots",
        "n_aps": "simulation.n_aps",
        "laps": "simulation.route_laps",
        "shadowing_sigma": "simulation.prop.shadowing_sigma_dbm",
        "detection_floor": "simulation.prop.detection_floor_dbm",
        "miss_prob": "simulation.prop.miss_prob",
        "spatial_shadowing": "simulation.spatial_shadowing_sigma_dbm",
    }
    overrides: dict = {}
    for attr, dotted in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[dotted] = value
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
        overrides["simulation.seed"] = args.seed
    if getattr(args, "per_robot_model", False):
        overrides["per_robot_model"] = True
    if getattr(args, "interpolate", False):
        overrides["interpolate"] = True
    if getattr(args, "align", False):
        overrides["align"] = True
    if getattr(args, "extent", None) is not None:
        parts = args.extent.lower().split("x")
        if len(parts) != 2:
            raise ConfigError(f"extent must look like 100x50, got {args.extent!r}")
        overrides["simulation.extent"] = [float(parts[0]), float(parts[1])]
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = parse_override_value(value.strip())
    if getattr(args, "threads", None) is None:
        env = os.environ.get("RADIOSLAM_THREADS")
        if env is not None:
            try:
                overrides["threads"] = int(env)
            except ValueError as exc:
                raise ConfigError(f"bad RADIOSLAM_THREADS={env!r}") from exc
    return overrides


def _config(args) -> PipelineConfig:
    return build_config(getattr(args, "config", None), _collect_overrides(args))


def _ingest(cfg: PipelineConfig, dataset_dir):
    dataset = load_dataset(dataset_dir)
    return dataset, ingest_dataset(dataset, window_s=cfg.window_s, min_aps=cfg.min_aps)


def _train(cfg: PipelineConfig, ingested, measure: str | None = None):
    params = cfg.similarity if measure is None else replace(cfg.similarity, measure=measure)
    return train_model(
        ingested,
        params,
        r=cfg.model_r,
        max_path_m=cfg.model_max_path_m,
        per_robot_model=cfg.per_robot_model,
    )


def cmd_simulate(args) -> int:
    cfg = _config(args)
    dataset = generate_dataset(cfg.simulation)
    dataio.write_dataset(args.out, dataset)
    for robot in dataset.robots:
        print(
            f"robot {robot.robot}: {len(robot.times)} epochs, "
            f"{len(robot.scans)} scans, "
            f"path {float(np.sum(np.hypot(*np.diff(robot.gt[:, :2], axis=0).T))):.1f} m"
        )
    print(f"world: {len(dataset.world.aps)} APs over "
          f"{dataset.world.width:g}x{dataset.world.height:g} m -> {args.out}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    cfg = _config(args)
    dataset, ingested = _ingest(cfg, args.dataset)
    out_dir = args.out if args.out is not None else args.dataset
    os.makedirs(out_dir, exist_ok=True)
    for ing in ingested:
        path = os.path.join(out_dir, dataio.FINGERPRINTS_NAME.format(r=ing.robot))
        dataio.write_fingerprints_jsonl(path, ing.fingerprints)
        print(f"robot {ing.robot}: {len(ing.fingerprints)} fingerprints -> {path}")
    return EXIT_OK


def cmd_train_model(args) -> int:
    cfg = _config(args)
    dataset, ingested = _ingest(cfg, args.dataset)
    trained = _train(cfg, ingested)
    trained.model.save(args.out)
    print(
        f"samples={trained.sample_count} bins={len(trained.model.bins)} "
        f"measure={cfg.similarity.measure} -> {args.out}"
    )
    return EXIT_OK


def cmd_slam(args) -> int:
    cfg = _config(args)
    dataset, ingested = _ingest(cfg, args.dataset)
    model = SimilarityDistanceModel.load(args.model)
    robots = _parse_robots(args.robots) if args.robots is not None else None
    per_robot_models = None
    if cfg.per_robot_model:
        per_robot_models = _train(cfg, ingested).per_robot
    result = run_slam(
        ingested,
        model,
        cfg.similarity,
        cfg.loop,
        noise=cfg.odom_info,
        lm=cfg.lm,
        robots=robots,
        per_robot_models=per_robot_models,
    )
    os.makedirs(args.out, exist_ok=True)
    est_path = os.path.join(args.out, "estimate.csv")
    dataio.write_estimate_csv(
        est_path,
        zip(
            result.node_robot.tolist(),
            result.node_index.tolist(),
            result.node_times.tolist(),
            result.poses[:, 0].tolist(),
            result.poses[:, 1].tolist(),
            result.poses[:, 2].tolist(),
        ),
    )
    graph_path = os.path.join(args.out, "graph.txt")
    dataio.write_graph(graph_path, result.problem, result.poses)

    accuracy = mean_position_error(result.poses, result.gt_poses, result.node_robot)
    odom = mean_position_error(result.odom_poses, result.gt_poses, result.node_robot)
    report = {
        "constraints": result.constraint_counts(),
        "chi2_initial": result.report.initial_chi2,
        "chi2_final": result.report.final_chi2,
        "iterations": result.report.iterations,
        "converged": result.report.converged,
        "reason": result.report.reason,
        "robots": list(result.robots),
        "mean_err": accuracy.mean_err,
        "rmse": accuracy.rmse,
        "max_err": accuracy.max_err,
        "per_robot_mean_err": {str(k): v for k, v in accuracy.per_robot.items()},
        "odometry_mean_err": odom.mean_err,
        "config": config_to_dict(cfg),
    }
    report_path = os.path.join(args.out, "report.json")
    dataio.write_json(report_path, report)
    counts = result.constraint_counts()
    print(
        f"nodes={len(result.poses)} odometry={counts['odometry']} "
        f"intra={counts['intra']} inter={counts['inter']} prior={counts['prior']}"
    )
    print(
        f"chi2 {result.report.initial_chi2:.6g} -> {result.report.final_chi2:.6g} "
        f"in {result.report.iterations} iterations ({result.report.reason})"
    )
    print(
        f"mean_err={accuracy.mean_err:.3f} m (odometry {odom.mean_err:.3f} m) "
        f"-> {est_path}"
    )
    if not result.report.converged:
        print("solver did not converge", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    dataset, ingested = _ingest(cfg, args.dataset)
    rows = dataio.read_estimate_csv(args.estimate)
    by_robot: dict[int, list] = {}
    for robot, node, t, x, y, theta in rows:
        by_robot.setdefault(robot, []).append((node, x, y, theta))
    est_list = []
    gt_list = []
    labels = []
    for ing in ingested:
        if ing.robot not in by_robot:
            continue
        entries = sorted(by_robot.pop(ing.robot))
        nodes = [e[0] for e in entries]
        if nodes != list(range(len(ing.fingerprints))):
            raise DataError(
                f"robot {ing.robot}: estimate nodes {len(nodes)} do not match "
                f"the dataset's {len(ing.fingerprints)} fingerprint nodes"
            )
        est_list.append(np.array([[e[1], e[2], e[3]] for e in entries]))
        gt_list.append(ing.gt_poses)
        labels.append(np.full(len(nodes), ing.robot, dtype=int))
    if by_robot:
        raise DataError(f"estimate contains unknown robots {sorted(by_robot)}")
    if not est_list:
        raise DataError("estimate shares no robots with the dataset")
    est = np.concatenate(est_list, axis=0)
    gt = np.concatenate(gt_list, axis=0)
    node_robot = np.concatenate(labels)
    if cfg.align:
        est = rigid_align(est, gt)
    report = mean_position_error(est, gt, node_robot)
    odom = odometry_report([ing for ing in ingested if ing.robot in set(node_robot.tolist())])
    print(
        f"mean_err={report.mean_err:.3f} rmse={report.rmse:.3f} "
        f"max_err={report.max_err:.3f} n={report.n_points}"
    )
    for r, err in report.per_robot.items():
        print(f"robot {r}: mean_err={err:.3f}")
    print(f"odometry baseline mean_err={odom.mean_err:.3f}")
    if args.out is not None:
        dataio.write_json(
            args.out,
            {
                "mean_err": report.mean_err,
                "rmse": report.rmse,
                "max_err": report.max_err,
                "n_points": report.n_points,
                "per_robot_mean_err": {str(k): v for k, v in report.per_robot.items()},
                "odometry_mean_err": odom.mean_err,
                "aligned": bool(cfg.align),
                "config": config_to_dict(cfg),
            },
        )
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    dataset, ingested = _ingest(cfg, args.dataset)
    robots = _parse_robots(args.robots) if args.robots is not None else None
    if robots is not None:
        ingested = [ing for ing in ingested if ing.robot in set(robots)]
        if not ingested:
            raise DataError(f"no dataset robots among {robots}")
    measures = [m.strip() for m in args.measures.split(",") if m.strip()]
    nu_s_grid = _parse_grid(args.nu_s_grid)
    nu_p_grid = _parse_grid(args.nu_p_grid)
    models = {m: _train(cfg, ingested, measure=m).model for m in measures}
    result = run_sweep(
        ingested,
        models,
        measures,
        nu_s_grid,
        nu_p_grid,
        cfg.similarity,
        noise=cfg.odom_info,
        lm=cfg.lm,
        min_path_separation_m=cfg.loop.min_path_separation_m,
        huber_delta_m=cfg.loop.huber_delta_m,
        threads=cfg.threads,
        metadata={
            "sigma_r": cfg.similarity.sigma_r,
            "sigma_tau": cfg.similarity.sigma_tau,
            "seed": cfg.seed,
        },
    )
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "sweep.csv")
    dataio.write_sweep_csv(csv_path, result.rows())
    for m in measures:
        print(render_sweep_table(result, m))
        print()
    if args.plots:
        for m in measures:
            svg_path = os.path.join(args.out, f"sweep_{m}.svg")
            plotting.save_svg(svg_path, plotting.sweep_heatmap(result, m))
            print(f"heatmap -> {svg_path}")
    print(f"sweep -> {csv_path}")
    return EXIT_OK


def cmd_export_plot(args) -> int:
    cfg = _config(args)
    if args.sweep is not None:
        rows = dataio.read_sweep_csv(args.sweep)
        cells = tuple(SweepCell(*row) for row in rows)
        measures = list(dict.fromkeys(c.measure for c in cells))
        measure = args.measure if args.measure is not None else measures[0]
        result = SweepResult(
            cells=cells,
            measures=tuple(measures),
            nu_s_grid=tuple(sorted({c.nu_s for c in cells})),
            nu_p_grid=tuple(sorted({c.nu_p for c in cells})),
            metadata={},
        )
        plotting.save_svg(args.out, plotting.sweep_heatmap(result, measure))
        print(f"heatmap -> {args.out}")
        return EXIT_OK

    dataset, ingested = _ingest(cfg, args.dataset)
    series: list[tuple[str, np.ndarray]] = []
    for ing in ingested:
        series.append((f"gt r{ing.robot}", ing.gt_poses))
    for ing in ingested:
        series.append((f"odometry r{ing.robot}", ing.odom_poses))
    for item in args.estimate or []:
        label, _, path = item.rpartition("=")
        if not label:
            label = os.path.splitext(os.path.basename(path))[0]
        rows = dataio.read_estimate_csv(path)
        by_robot: dict[int, list] = {}
        for robot, node, t, x, y, theta in rows:
            by_robot.setdefault(robot, []).append((node, x, y))
        for robot in sorted(by_robot):
            pts = np.array([[x, y] for _, x, y in sorted(by_robot[robot])])
            series.append((f"{label} r{robot}", pts))
    extent = None
    aps = None
    if dataset.world is not None:
        extent = (dataset.world.width, dataset.world.height)
        aps = dataset.world.ap_positions()
    plotting.save_svg(
        args.out,
        plotting.trajectory_overlay(series, aps=aps, extent=extent, title=args.title),
    )
    print(f"trajectories -> {args.out}")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML or JSON config file")
    p.add_argument("--seed", type=int, help="master seed (also sets simulation.seed)")
    p.add_argument("--threads", type=int, help="worker threads (env RADIOSLAM_THREADS)")
    p.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override any dotted config key, e.g. --set lm.max_iterations=50",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radioslam",
        description="Collaborative SE(2) SLAM from WiFi fingerprint similarity.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic multi-robot dataset")
    _add_common(p)
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--n-robots", dest="n_robots", type=int)
    p.add_argument("--n-aps", dest="n_aps", type=int)
    p.add_argument("--extent", help="arena size, e.g. 100x50")
    p.add_argument("--laps", type=int, help="route repetitions")
    p.add_argument("--shadowing-sigma", dest="shadowing_sigma", type=float)
    p.add_argument("--detection-floor", dest="detection_floor", type=float)
    p.add_argument("--miss-prob", dest="miss_prob", type=float)
    p.add_argument("--spatial-shadowing", dest="spatial_shadowing", type=float)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ingest", help="window scans into fingerprints")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", help="output directory (default: dataset directory)")
    p.add_argument("--window-s", dest="window_s", type=float)
    p.add_argument("--min-aps", dest="min_aps", type=int)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train-model", help="fit the similarity-to-distance model")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--measure", choices=["proposed", "gaussian", "cosine"])
    p.add_argument("--sigma-r", dest="sigma_r", type=float)
    p.add_argument("--sigma-tau", dest="sigma_tau", type=float)
    p.add_argument("--tau-scale", dest="tau_scale", choices=["ratio", "count"])
    p.add_argument("--bin-width", dest="bin_width", type=float)
    p.add_argument("--max-path-m", dest="max_path_m", type=float)
    p.add_argument("--window-s", dest="window_s", type=float)
    p.add_argument("--min-aps", dest="min_aps", type=int)
    p.set_defaults(func=cmd_train_model)

    p = sub.add_parser("slam", help="build and optimize the pose graph")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True, help="trained model JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--robots", help="comma-separated robot ids (default: all)")
    p.add_argument("--measure", choices=["proposed", "gaussian", "cosine"])
    p.add_argument("--sigma-r", dest="sigma_r", type=float)
    p.add_argument("--sigma-tau", dest="sigma_tau", type=float)
    p.add_argument("--tau-scale", dest="tau_scale", choices=["ratio", "count"])
    p.add_argument("--nu-s", dest="nu_s", type=float)
    p.add_argument("--nu-p", dest="nu_p", type=float)
    p.add_argument("--min-separation", dest="min_separation", type=float)
    p.add_argument("--huber", type=float, help="Huber width for distance edges, m")
    p.add_argument("--per-robot-model", dest="per_robot_model", action="store_true")
    p.add_argument("--window-s", dest="window_s", type=float)
    p.add_argument("--min-aps", dest="min_aps", type=int)
    p.set_defaults(func=cmd_slam)

    p = sub.add_parser("evaluate", help="score an estimate against ground truth")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--estimate", required=True, help="estimate.csv from slam")
    p.add_argument("--out", help="optional report JSON")
    p.add_argument("--align", action="store_true", help="diagnostic rigid alignment")
    p.add_argument("--window-s", dest="window_s", type=float)
    p.add_argument("--min-aps", dest="min_aps", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="grid over nu_s, nu_p and measures")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--robots", help="restrict to these robots")
    p.add_argument("--measures", default="proposed,gaussian,cosine")
    p.add_argument("--nu-s-grid", dest="nu_s_grid", default="0,1,2,3,4,5")
    p.add_argument("--nu-p-grid", dest="nu_p_grid", default="0")
    p.add_argument("--plots", action="store_true", help="emit heatmap SVGs")
    p.add_argument("--sigma-r", dest="sigma_r", type=float)
    p.add_argument("--sigma-tau", dest="sigma_tau", type=float)
    p.add_argument("--tau-scale", dest="tau_scale", choices=["ratio", "count"])
    p.add_argument("--min-separation", dest="min_separation", type=float)
    p.add_argument("--huber", type=float)
    p.add_argument("--max-path-m", dest="max_path_m", type=float)
    p.add_argument("--bin-width", dest="bin_width", type=float)
    p.add_argument("--window-s", dest="window_s", type=float)
    p.add_argument("--min-aps", dest="min_aps", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export-plot", help="render trajectories or sweep heatmaps")
    _add_common(p)
    p.add_argument("--dataset", help="dataset directory (trajectory mode)")
    p.add_argument(
        "--estimate",
        action="append",
        metavar="[LABEL=]PATH",
        help="estimate csv to overlay; repeatable",
    )
    p.add_argument("--sweep", help="sweep.csv (heatmap mode)")
    p.add_argument("--measure", help="measure for heatmap mode")
    p.add_argument("--title", default="")
    p.add_argument("--out", required=True, help="output SVG")
    p.add_argument("--window-s", dest="window_s", type=float)
    p.add_argument("--min-aps", dest="min_aps", type=int)
    p.set_defaults(func=cmd_export_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "export-plot" and args.sweep is None and args.dataset is None:
        parser.error("export-plot needs --dataset (trajectories) or --sweep (heatmap)")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
