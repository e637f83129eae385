"""Trajectory scoring and threshold sweeps.

Errors are per-node Euclidean position distances in the shared anchored
frame: estimates and ground truth both start from the known start poses, so
no post-hoc alignment is applied (an optional rigid fit exists for
diagnostics only).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .constraints import LoopClosureConfig, OdomInfoParams
from .distance_model import SimilarityDistanceModel
from .errors import ConfigError, DataError
from .pipeline import IngestedRobot, precompute_candidates, run_slam
from .pose_graph import LmOptions
from .similarity import MEASURES, SimilarityParams


@dataclass(frozen=True)
class AccuracyReport:
    mean_err: float
    rmse: float
    max_err: float
    per_robot: dict[int, float]  # mean error per robot
    n_points: int


def mean_position_error(
    est: np.ndarray, gt: np.ndarray, node_robot: np.ndarray | None = None
) -> AccuracyReport:
    """Per-node position error statistics between aligned pose arrays."""
    est = np.asarray(est, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if est.shape[0] != gt.shape[0] or est.shape[0] == 0:
        raise DataError(
            f"estimate has {est.shape[0]} nodes but ground truth has {gt.shape[0]}"
        )
    err = np.hypot(est[:, 0] - gt[:, 0], est[:, 1] - gt[:, 1])
    per_robot = {}
    if node_robot is not None:
        node_robot = np.asarray(node_robot)
        if node_robot.shape[0] != est.shape[0]:
            raise DataError("node_robot labels do not match the node count")
        for r in sorted(set(node_robot.tolist())):
            per_robot[int(r)] = float(np.mean(err[node_robot == r]))
    return AccuracyReport(
        mean_err=float(np.mean(err)),
        rmse=float(np.sqrt(np.mean(err * err))),
        max_err=float(np.max(err)),
        per_robot=per_robot,
        n_points=int(len(err)),
    )


def improvement_percent(base_err: float, new_err: float) -> float:
    """Relative error reduction: 100 * (base - new) / base."""
    if base_err <= 0:
        raise DataError(f"improvement undefined for base error {base_err}")
    return 100.0 * (base_err - new_err) / base_err


def rigid_align(est: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Diagnostic-only least-squares rigid fit of est positions onto gt."""
    est = np.asarray(est, dtype=float)
    gt = np.asarray(gt, dtype=float)
    p = est[:, :2]
    q = gt[:, :2]
    pc = p - p.mean(axis=0)
    qc = q - q.mean(axis=0)
    cov = pc.T @ qc
    u, _, vt = np.linalg.svd(cov)
    d = np.sign(np.linalg.det(u @ vt))
    rot = (u @ np.diag([1.0, d]) @ vt).T
    shift = q.mean(axis=0) - rot @ p.mean(axis=0)
    out = est.copy()
    out[:, :2] = p @ rot.T + shift
    dtheta = np.arctan2(rot[1, 0], rot[0, 0])
    out[:, 2] = est[:, 2] + dtheta
    return out


@dataclass(frozen=True)
class SweepCell:
    measure: str
    nu_s: float
    nu_p: float
    mean_err: float
    rmse: float
    max_err: float
    converged: bool


@dataclass(frozen=True)
class SweepResult:
    cells: tuple[SweepCell, ...]  # ordered by (measure order, nu_s, nu_p)
    measures: tuple[str, ...]
    nu_s_grid: tuple[float, ...]
    nu_p_grid: tuple[float, ...]
    metadata: dict

    def cell(self, measure: str, nu_s: float, nu_p: float) -> SweepCell:
        for c in self.cells:
            if c.measure == measure and c.nu_s == nu_s and c.nu_p == nu_p:
                return c
        raise KeyError((measure, nu_s, nu_p))

    def best(self, measure: str) -> SweepCell:
        # Non-converged cells stay eligible: the flag means the tolerance was
        # not reached within budget, and accepted LM steps never increase chi2.
        candidates = [c for c in self.cells if c.measure == measure]
        if not candidates:
            raise DataError(f"no cells for measure {measure!r}")
        return min(candidates, key=lambda c: (c.mean_err, c.nu_s, c.nu_p))

    def rows(self):
        for c in self.cells:
            yield (
                c.measure, c.nu_s, c.nu_p, c.mean_err, c.rmse, c.max_err, c.converged,
            )


def render_sweep_table(result: SweepResult, measure: str) -> str:
    """Human-readable grid: nu_s rows, nu_p columns, mean error cells."""
    lines = [f"measure: {measure}"]
    header = "nu_s\\nu_p" + "".join(f"{v:>10.3g}" for v in result.nu_p_grid)
    lines.append(header)
    for nu_s in result.nu_s_grid:
        row = [f"{nu_s:>9.3g}"]
        for nu_p in result.nu_p_grid:
            c = result.cell(measure, nu_s, nu_p)
            mark = "" if c.converged else "*"
            row.append(f"{c.mean_err:>9.3f}{mark}" if mark else f"{c.mean_err:>10.3f}")
        lines.append("".join(row))
    return "\n".join(lines)


def run_sweep(
    ingested: list[IngestedRobot],
    models: dict[str, SimilarityDistanceModel],
    measures: list[str],
    nu_s_grid: list[float],
    nu_p_grid: list[float],
    params: SimilarityParams,
    noise: OdomInfoParams | None = None,
    lm: LmOptions | None = None,
    min_path_separation_m: float = 100.0,
    huber_delta_m: float | None = None,
    threads: int = 1,
    metadata: dict | None = None,
) -> SweepResult:
    """Optimize and score every (measure, nu_s, nu_p) cell on one dataset.

    Each measure uses its own trained model (similarity scales differ across
    measures, so one shared model would mispredict). Candidate pairs are
    computed once per measure and filtered per cell; a non-converged solve is
    recorded with converged=False rather than aborting the sweep.
    """
    if not nu_s_grid or not nu_p_grid or not measures:
        raise ConfigError("sweep grids and measures must be non-empty")
    for m in measures:
        if m not in MEASURES:
            raise ConfigError(f"unknown measure {m!r}")
        if m not in models:
            raise ConfigError(f"no trained model supplied for measure {m!r}")

    jobs = []
    for m in measures:
        mp = replace(params, measure=m)
        intra, inter = precompute_candidates(
            ingested, models[m], mp, min_path_separation_m
        )
        for nu_s in nu_s_grid:
            for nu_p in nu_p_grid:
                jobs.append((m, mp, nu_s, nu_p, intra, inter))

    def run_cell(job) -> SweepCell:
        m, mp, nu_s, nu_p, intra, inter = job
        cfg = LoopClosureConfig(
            nu_s=nu_s,
            nu_p=nu_p,
            min_path_separation_m=min_path_separation_m,
            huber_delta_m=huber_delta_m,
        )
        result = run_slam(
            ingested,
            models[m],
            mp,
            cfg,
            noise=noise,
            lm=lm,
            intra_cands=intra,
            inter_cands=inter,
        )
        report = mean_position_error(result.poses, result.gt_poses, result.node_robot)
        return SweepCell(
            measure=m,
            nu_s=nu_s,
            nu_p=nu_p,
            mean_err=report.mean_err,
            rmse=report.rmse,
            max_err=report.max_err,
            converged=result.report.converged,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = tuple(pool.map(run_cell, jobs))
    else:
        cells = tuple(run_cell(job) for job in jobs)

    return SweepResult(
        cells=cells,
        measures=tuple(measures),
        nu_s_grid=tuple(nu_s_grid),
        nu_p_grid=tuple(nu_p_grid),
        metadata=dict(metadata or {}),
    )


def odometry_report(ingested: list[IngestedRobot]) -> AccuracyReport:
    """Error of the anchored odometry baseline over the same nodes."""
    est = np.concatenate([ing.odom_poses for ing in ingested], axis=0)
    gt = np.concatenate([ing.gt_poses for ing in ingested], axis=0)
    robots = np.concatenate(
        [np.full(len(ing.fingerprints), ing.robot, dtype=int) for ing in ingested]
    )
    return mean_position_error(est, gt, robots)
