"""Dataset ingestion and end-to-end SLAM runs.

The node grid is the fingerprint windowing: one pose-graph node per emitted
fingerprint. Each node is pinned to the scan epoch nearest its window center
(ties to the earlier epoch); odometry, ground truth and cumulative path
length are sampled at that representative epoch.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import dataio
from .constraints import (
    Distance,
    LoopClosureConfig,
    OdomInfoParams,
    PosePrior,
    RelativePose,
    RobotData,
    build_problem,
    intra_candidates,
    inter_candidates,
)
from .distance_model import (
    SimilarityDistanceModel,
    collect_training_pairs,
    fit_binned_model,
)
from .errors import DataError
from .fingerprint import Fingerprint, RawScan, group_scans
from .pose_graph import LmOptions, OptimizeReport, PoseGraphProblem, optimize
from .se2 import Pose2, compose_increments, path_lengths
from .similarity import SimilarityParams


@dataclass(frozen=True)
class LoadedRobot:
    robot: int
    times: np.ndarray  # (E,) epoch timestamps
    gt: np.ndarray  # (E, 3)
    odom_increments: np.ndarray  # (E-1, 3)
    scans: tuple[RawScan, ...]


@dataclass(frozen=True)
class LoadedDataset:
    directory: str
    robots: tuple[LoadedRobot, ...]
    world: object = None
    simconfig: object = None


def loaded_from_sim(dataset) -> LoadedDataset:
    """Adapt an in-memory SimDataset without a disk round-trip."""
    robots = tuple(
        LoadedRobot(
            robot=r.robot,
            times=r.times,
            gt=r.gt,
            odom_increments=r.odom_increments,
            scans=tuple(r.scans),
        )
        for r in dataset.robots
    )
    return LoadedDataset(
        directory="",
        robots=robots,
        world=dataset.world,
        simconfig=dataset.config,
    )


def load_dataset(directory) -> LoadedDataset:
    """Read the standard dataset layout back into memory."""
    ids = dataio.dataset_robot_ids(directory)
    robots = []
    for r in ids:
        times, gt = dataio.read_pose_csv(
            os.path.join(directory, dataio.GT_NAME.format(r=r))
        )
        odom_times, increments = dataio.read_odometry_csv(
            os.path.join(directory, dataio.ODOM_NAME.format(r=r))
        )
        scans = dataio.read_scans_jsonl(
            os.path.join(directory, dataio.SCANS_NAME.format(r=r))
        )
        if len(odom_times) != len(times) - 1:
            raise DataError(
                f"robot {r}: {len(increments)} odometry steps do not match "
                f"{len(times)} ground-truth epochs"
            )
        robots.append(
            LoadedRobot(
                robot=r,
                times=times,
                gt=gt,
                odom_increments=increments,
                scans=tuple(scans),
            )
        )
    world = None
    world_path = os.path.join(directory, dataio.WORLD_NAME)
    if os.path.exists(world_path):
        world = dataio.read_world_json(world_path)
    simconfig = None
    sim_path = os.path.join(directory, dataio.SIMCONFIG_NAME)
    if os.path.exists(sim_path):
        simconfig = dataio.read_simconfig_json(sim_path)
    return LoadedDataset(
        directory=str(directory),
        robots=tuple(robots),
        world=world,
        simconfig=simconfig,
    )


@dataclass(frozen=True)
class IngestedRobot:
    """Node-aligned view of one robot: fingerprints plus per-node samples."""

    robot: int
    fingerprints: tuple[Fingerprint, ...]
    node_epochs: np.ndarray  # (N,) epoch index of each node
    node_times: np.ndarray  # (N,) representative epoch timestamps
    odom_poses: np.ndarray  # (N, 3) composed odometry at node epochs
    gt_poses: np.ndarray  # (N, 3) ground truth at node epochs
    arc: np.ndarray  # (N,) cumulative odometry path length at node epochs

    def robot_data(self) -> RobotData:
        return RobotData(
            robot=self.robot,
            poses=self.odom_poses,
            fingerprints=self.fingerprints,
            arc=self.arc,
        )


def representative_epochs(
    times: np.ndarray, fingerprints, window_s: float
) -> np.ndarray:
    """Epoch index nearest each fingerprint's window center; ties go earlier.

    Only epochs inside the fingerprint's window qualify; windows are
    [t0 + k*w, t0 + (k+1)*w) as laid out by the scan grouping.
    """
    times = np.asarray(times, dtype=float)
    out = np.empty(len(fingerprints), dtype=int)
    for n, fp in enumerate(fingerprints):
        center = fp.timestamp
        start = center - 0.5 * window_s
        end = center + 0.5 * window_s
        lo = int(np.searchsorted(times, start, side="left"))
        hi = int(np.searchsorted(times, end, side="left"))
        if lo >= hi:
            raise DataError(
                f"no epoch inside window [{start}, {end}) of robot "
                f"{fp.robot_id}; scans and odometry timestamps disagree"
            )
        window_times = times[lo:hi]
        # argmin takes the first minimum, which is the earlier epoch on ties.
        out[n] = lo + int(np.argmin(np.abs(window_times - center)))
    return out


def ingest_robot(
    robot: LoadedRobot, window_s: float = 5.0, min_aps: int = 1
) -> IngestedRobot:
    fingerprints = group_scans(robot.scans, window_s, min_aps=min_aps)
    if not fingerprints:
        raise DataError(f"robot {robot.robot}: no usable fingerprints")
    epochs = representative_epochs(robot.times, fingerprints, window_s)
    odom_full = compose_increments(
        Pose2.from_array(robot.gt[0]), robot.odom_increments
    )
    arc_full = path_lengths(odom_full)
    return IngestedRobot(
        robot=robot.robot,
        fingerprints=tuple(fingerprints),
        node_epochs=epochs,
        node_times=robot.times[epochs],
        odom_poses=odom_full[epochs],
        gt_poses=robot.gt[epochs],
        arc=arc_full[epochs],
    )


def ingest_dataset(
    dataset: LoadedDataset, window_s: float = 5.0, min_aps: int = 1
) -> list[IngestedRobot]:
    return [ingest_robot(r, window_s=window_s, min_aps=min_aps) for r in dataset.robots]


@dataclass(frozen=True)
class TrainedModel:
    model: SimilarityDistanceModel
    sample_count: int
    per_robot: dict[int, SimilarityDistanceModel] = field(default_factory=dict)


def train_model(
    ingested: list[IngestedRobot],
    params: SimilarityParams,
    r: float = 0.05,
    max_path_m: float = 100.0,
    per_robot_model: bool = False,
) -> TrainedModel:
    """Fit the similarity-to-distance model from short odometry segments.

    Samples from all robots pool into one model by default; with
    per_robot_model each robot also gets a model from its own samples only
    (used for its intra-robot closures, while cross-robot constraints keep
    the pooled model).
    """
    all_samples = []
    per_robot: dict[int, SimilarityDistanceModel] = {}
    for ing in ingested:
        samples = collect_training_pairs(
            list(ing.fingerprints),
            ing.odom_poses,
            params,
            max_path_m=max_path_m,
            arc=ing.arc,
        )
        all_samples.extend(samples)
        if per_robot_model:
            if not samples:
                raise DataError(
                    f"robot {ing.robot}: zero training pairs; "
                    f"max_path_m={max_path_m} is the likely cause"
                )
            per_robot[ing.robot] = fit_binned_model(
                samples, r=r, max_path_m=max_path_m
            )
    if not all_samples:
        raise DataError(
            f"zero training pairs across all robots; "
            f"max_path_m={max_path_m} is the likely cause"
        )
    pooled = fit_binned_model(all_samples, r=r, max_path_m=max_path_m)
    return TrainedModel(
        model=pooled, sample_count=len(all_samples), per_robot=per_robot
    )


@dataclass(frozen=True)
class SlamResult:
    problem: PoseGraphProblem
    poses: np.ndarray  # (N, 3) optimized
    report: OptimizeReport
    robots: tuple[int, ...]
    node_robot: np.ndarray  # (N,) robot id per node
    node_index: np.ndarray  # (N,) node ordinal within its robot
    node_times: np.ndarray  # (N,)
    odom_poses: np.ndarray  # (N, 3) anchored odometry baseline
    gt_poses: np.ndarray  # (N, 3)

    def constraint_counts(self) -> dict[str, int]:
        counts = {"odometry": 0, "intra": 0, "inter": 0, "prior": 0}
        for c in self.problem.constraints:
            if isinstance(c, RelativePose):
                counts["odometry"] += 1
            elif isinstance(c, PosePrior):
                counts["prior"] += 1
            elif isinstance(c, Distance):
                if c.i.robot == c.j.robot:
                    counts["intra"] += 1
                else:
                    counts["inter"] += 1
        return counts


def run_slam(
    ingested: list[IngestedRobot],
    model: SimilarityDistanceModel,
    params: SimilarityParams,
    cfg: LoopClosureConfig,
    noise: OdomInfoParams | None = None,
    lm: LmOptions | None = None,
    robots: list[int] | None = None,
    per_robot_models: dict[int, SimilarityDistanceModel] | None = None,
    intra_cands: dict[int, list] | None = None,
    inter_cands: dict[tuple[int, int], list] | None = None,
) -> SlamResult:
    """Build and optimize the pose graph for the selected robots."""
    if robots is not None:
        selected = [ing for ing in ingested if ing.robot in set(robots)]
        missing = set(robots) - {ing.robot for ing in selected}
        if missing:
            raise DataError(f"robots {sorted(missing)} not present in the dataset")
    else:
        selected = list(ingested)
    if not selected:
        raise DataError("run_slam needs at least one robot")

    data = [ing.robot_data() for ing in selected]
    problem = build_problem(
        data,
        model,
        params,
        cfg,
        noise=noise,
        per_robot_models=per_robot_models,
        intra_cands=intra_cands,
        inter_cands=inter_cands,
    )
    poses, report = optimize(problem, lm if lm is not None else LmOptions())

    node_robot = np.concatenate(
        [np.full(len(ing.fingerprints), ing.robot, dtype=int) for ing in selected]
    )
    node_index = np.concatenate(
        [np.arange(len(ing.fingerprints), dtype=int) for ing in selected]
    )
    node_times = np.concatenate([ing.node_times for ing in selected])
    odom_poses = np.concatenate([ing.odom_poses for ing in selected], axis=0)
    gt_poses = np.concatenate([ing.gt_poses for ing in selected], axis=0)
    return SlamResult(
        problem=problem,
        poses=poses,
        report=report,
        robots=tuple(ing.robot for ing in selected),
        node_robot=node_robot,
        node_index=node_index,
        node_times=node_times,
        odom_poses=odom_poses,
        gt_poses=gt_poses,
    )


def precompute_candidates(
    ingested: list[IngestedRobot],
    model: SimilarityDistanceModel,
    params: SimilarityParams,
    min_path_separation_m: float,
    per_robot_models: dict[int, SimilarityDistanceModel] | None = None,
) -> tuple[dict[int, list], dict[tuple[int, int], list]]:
    """One similarity/prediction pass reusable across threshold sweeps."""
    intra: dict[int, list] = {}
    inter: dict[tuple[int, int], list] = {}
    data = [ing.robot_data() for ing in ingested]
    for d in data:
        intra_model = (per_robot_models or {}).get(d.robot, model)
        intra[d.robot] = intra_candidates(
            d, intra_model, params, min_path_separation_m
        )
    for a in range(len(data)):
        for b in range(a + 1, len(data)):
            inter[(data[a].robot, data[b].robot)] = inter_candidates(
                data[a], data[b], model, params
            )
    return intra, inter
