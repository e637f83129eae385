"""Constraint harvesting for the collaborative pose graph.

Three constraint families feed the optimizer: relative-pose edges between
consecutive odometry nodes, scalar distance edges between same-robot
fingerprint pairs whose odometry paths have diverged, and scalar distance
edges between fingerprint pairs of different robots. Distance edges carry the
model-predicted distance and an information weight 1/variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distance_model import SimilarityDistanceModel, predict_many
from .errors import ConfigError, DataError
from .fingerprint import Fingerprint
from .se2 import path_lengths, relative_increments
from .similarity import FingerprintMatrix, SimilarityParams, pairwise_similarity

# Single-sample bins report zero variance; cap edge information at 1/(0.5 m)^2.
VARIANCE_FLOOR_M2 = 0.25


@dataclass(frozen=True, order=True)
class NodeId:
    robot: int
    t: int


@dataclass(frozen=True)
class RelativePose:
    i: NodeId
    j: NodeId
    z: tuple[float, float, float]  # (dx, dy, dtheta) of j in the frame of i
    info: np.ndarray  # 3x3 symmetric positive definite

    def __post_init__(self):
        if self.i == self.j:
            raise DataError("relative-pose edge endpoints must differ")


@dataclass(frozen=True)
class Distance:
    i: NodeId
    j: NodeId
    d: float  # predicted inter-node distance, meters
    w: float  # scalar information, 1/variance

    def __post_init__(self):
        if self.i == self.j:
            raise DataError("distance edge endpoints must differ")
        if self.d < 0 or self.w <= 0:
            raise DataError(f"distance edge needs d >= 0 and w > 0, got {self}")


@dataclass(frozen=True)
class PosePrior:
    i: NodeId
    z: tuple[float, float, float]
    info: np.ndarray


Constraint = RelativePose | Distance | PosePrior


@dataclass(frozen=True)
class LoopClosureConfig:
    """Acceptance thresholds on predicted distance, meters."""

    nu_s: float = 4.0  # intra-robot
    nu_p: float = 3.0  # inter-robot
    min_path_separation_m: float = 100.0  # intra gate: path length, not chord
    huber_delta_m: float | None = None  # robust kernel on distance edges

    def __post_init__(self):
        if self.nu_s < 0 or self.nu_p < 0 or self.min_path_separation_m < 0:
            raise ConfigError(f"loop-closure thresholds must be >= 0: {self}")
        if self.huber_delta_m is not None and self.huber_delta_m <= 0:
            raise ConfigError("huber_delta_m must be positive when set")


@dataclass(frozen=True)
class OdomInfoParams:
    """Per-step odometry noise model; sigmas grow with step size.

    sigma_xy = trans_per_m * step_translation + trans_floor_m
    sigma_theta = rot_per_rad * |step_rotation| + rot_per_m * step_translation
    """

    trans_per_m: float = 0.05
    trans_floor_m: float = 0.01
    rot_per_rad: float = 0.05
    rot_per_m: float = 0.002

    def __post_init__(self):
        if min(self.trans_per_m, self.trans_floor_m, self.rot_per_rad, self.rot_per_m) <= 0:
            raise ConfigError(f"odometry info parameters must be positive: {self}")

    def step_sigmas(self, dx: float, dy: float, dtheta: float) -> tuple[float, float]:
        trans = math.hypot(dx, dy)
        sigma_xy = self.trans_per_m * trans + self.trans_floor_m
        sigma_theta = self.rot_per_rad * abs(dtheta) + self.rot_per_m * trans
        return sigma_xy, max(sigma_theta, 1e-4)


@dataclass(frozen=True)
class RobotData:
    """One robot's node-aligned inputs: odometry pose and fingerprint per node.

    arc[t] is the cumulative odometry path length at node t; when the caller
    has denser odometry than nodes it should supply arc from the full path,
    otherwise node-to-node chords are used.
    """

    robot: int
    poses: np.ndarray  # (N, 3) odometry poses at the fingerprint nodes
    fingerprints: tuple[Fingerprint, ...]
    arc: np.ndarray | None = None  # (N,) cumulative path length

    def __post_init__(self):
        poses = np.asarray(self.poses, dtype=float)
        object.__setattr__(self, "poses", poses)
        object.__setattr__(self, "fingerprints", tuple(self.fingerprints))
        if poses.ndim != 2 or poses.shape[1] != 3 or poses.shape[0] == 0:
            raise DataError(f"robot {self.robot}: poses must be (N, 3) with N >= 1")
        if len(self.fingerprints) != len(poses):
            raise DataError(
                f"robot {self.robot}: {len(self.fingerprints)} fingerprints vs "
                f"{len(poses)} poses"
            )
        arc = self.arc
        arc = path_lengths(poses) if arc is None else np.asarray(arc, dtype=float)
        if arc.shape != (len(poses),):
            raise DataError(f"robot {self.robot}: arc must have one entry per node")
        object.__setattr__(self, "arc", arc)

    def __len__(self) -> int:
        return len(self.fingerprints)


def odometry_constraints(
    robot: int, poses: np.ndarray, noise: OdomInfoParams
) -> list[RelativePose]:
    """One relative-pose edge per consecutive node pair of one robot."""
    poses = np.asarray(poses, dtype=float)
    edges = []
    for t, (dx, dy, dth) in enumerate(relative_increments(poses), start=1):
        sigma_xy, sigma_theta = noise.step_sigmas(dx, dy, dth)
        info = np.diag([sigma_xy**-2, sigma_xy**-2, sigma_theta**-2])
        edges.append(
            RelativePose(
                i=NodeId(robot, t - 1),
                j=NodeId(robot, t),
                z=(float(dx), float(dy), float(dth)),
                info=info,
            )
        )
    return edges


def _predicted_distances(
    fa: list[Fingerprint] | FingerprintMatrix,
    fb: list[Fingerprint] | FingerprintMatrix,
    model: SimilarityDistanceModel,
    params: SimilarityParams,
) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(fa, FingerprintMatrix) and isinstance(fb, FingerprintMatrix):
        ma, mb = fa, fb
    else:
        # Raw lists get one union vocabulary; the two streams usually see
        # different AP sets and the batch kernel needs shared columns.
        la = fa.fingerprints if isinstance(fa, FingerprintMatrix) else list(fa)
        lb = fb.fingerprints if isinstance(fb, FingerprintMatrix) else list(fb)
        vocab = sorted({ap for fp in la + lb for ap in fp.entries})
        ma = FingerprintMatrix(la, vocab)
        mb = FingerprintMatrix(lb, vocab)
    sim = pairwise_similarity(ma, mb, params)
    return predict_many(model, sim)


def intra_candidates(
    data: RobotData, model: SimilarityDistanceModel, params: SimilarityParams,
    min_path_separation_m: float,
) -> list[tuple[int, int, float, float]]:
    """All separation-gated same-robot pairs as (i, j, d_hat, var), j < i.

    Threshold filtering is deliberately left to the caller so one candidate
    pass can serve a whole nu_s sweep.
    """
    d_hat, var = _predicted_distances(
        list(data.fingerprints), list(data.fingerprints), model, params
    )
    out = []
    for i in range(len(data)):
        for j in range(i):
            if data.arc[i] - data.arc[j] > min_path_separation_m:
                out.append((i, j, float(d_hat[i, j]), float(var[i, j])))
    return out


def inter_candidates(
    data_k: RobotData, data_l: RobotData,
    model: SimilarityDistanceModel, params: SimilarityParams,
) -> list[tuple[int, int, float, float]]:
    """All cross-robot pairs as (i in k, j in l, d_hat, var); no gate."""
    d_hat, var = _predicted_distances(
        list(data_k.fingerprints), list(data_l.fingerprints), model, params
    )
    out = []
    for i in range(len(data_k)):
        for j in range(len(data_l)):
            out.append((i, j, float(d_hat[i, j]), float(var[i, j])))
    return out


def _distance_edge(robot_i: int, i: int, robot_j: int, j: int, d: float, var: float) -> Distance:
    return Distance(
        i=NodeId(robot_i, i),
        j=NodeId(robot_j, j),
        d=d,
        w=1.0 / max(var, VARIANCE_FLOOR_M2),
    )


def intra_robot_closures(
    data: RobotData,
    model: SimilarityDistanceModel,
    params: SimilarityParams,
    cfg: LoopClosureConfig,
    candidates: list[tuple[int, int, float, float]] | None = None,
) -> list[Distance]:
    """Distance edges between same-robot nodes whose paths have diverged.

    A pair qualifies when the odometry path between the nodes exceeds
    min_path_separation_m and the predicted distance is strictly below nu_s.
    """
    if candidates is None:
        candidates = intra_candidates(data, model, params, cfg.min_path_separation_m)
    return [
        _distance_edge(data.robot, i, data.robot, j, d, var)
        for i, j, d, var in candidates
        if d < cfg.nu_s
    ]


def inter_robot_closures(
    data_k: RobotData,
    data_l: RobotData,
    model: SimilarityDistanceModel,
    params: SimilarityParams,
    cfg: LoopClosureConfig,
    candidates: list[tuple[int, int, float, float]] | None = None,
) -> list[Distance]:
    """Distance edges between nodes of two different robots.

    Every cross pair with predicted distance strictly below nu_p qualifies;
    there is no path-separation gate across robots. Callers iterate unordered
    robot pairs once, so no edge is duplicated in the reverse direction.
    """
    if data_k.robot == data_l.robot:
        raise DataError("inter-robot closures need two distinct robots")
    if candidates is None:
        candidates = inter_candidates(data_k, data_l, model, params)
    return [
        _distance_edge(data_k.robot, i, data_l.robot, j, d, var)
        for i, j, d, var in candidates
        if d < cfg.nu_p
    ]


def build_problem(
    robots: list[RobotData],
    model: SimilarityDistanceModel,
    params: SimilarityParams,
    cfg: LoopClosureConfig,
    noise: OdomInfoParams | None = None,
    anchors: dict[int, tuple[float, float, float]] | None = None,
    anchor_info: float = 1e6,
    per_robot_models: dict[int, SimilarityDistanceModel] | None = None,
    intra_cands: dict[int, list] | None = None,
    inter_cands: dict[tuple[int, int], list] | None = None,
):
    """Assemble the full pose-graph problem for a set of robots.

    Nodes are (robot, t) in input order; initial values are each robot's
    odometry re-expressed from its anchor pose; one strong prior per robot
    fixes the gauge. When per_robot_models is given, intra-robot closures use
    that robot's own model while inter-robot closures use the pooled model.
    intra_cands/inter_cands inject precomputed candidate lists so threshold
    sweeps can reuse one similarity pass; when given they take precedence.
    """
    from .pose_graph import PoseGraphProblem  # deferred: pose_graph imports our types

    if not robots:
        raise DataError("build_problem needs at least one robot")
    ids = [r.robot for r in robots]
    if len(set(ids)) != len(ids):
        raise DataError(f"duplicate robot ids: {ids}")
    noise = noise if noise is not None else OdomInfoParams()
    anchors = anchors or {}

    from .se2 import Pose2, compose, inverse

    nodes: list[NodeId] = []
    initial: list[tuple[float, float, float]] = []
    constraints: list[Constraint] = []

    for data in robots:
        anchor = np.asarray(
            anchors.get(data.robot, data.poses[0]), dtype=float
        )
        # Re-express the odometry chain so it starts at the anchor pose. When
        # the chain already starts there, keep the poses bit-identical so a
        # constraint-free problem optimizes to the odometry exactly.
        if np.array_equal(anchor, data.poses[0]):
            shift = None
        else:
            shift = compose(
                Pose2.from_array(anchor), inverse(Pose2.from_array(data.poses[0]))
            )
        for t in range(len(data)):
            nodes.append(NodeId(data.robot, t))
            if shift is None:
                initial.append(tuple(data.poses[t]))
            else:
                moved = compose(shift, Pose2.from_array(data.poses[t]))
                initial.append((moved.x, moved.y, moved.theta))
        constraints.append(
            PosePrior(
                i=NodeId(data.robot, 0),
                z=tuple(anchor),
                info=np.diag([anchor_info] * 3),
            )
        )
        constraints.extend(odometry_constraints(data.robot, data.poses, noise))

    for data in robots:
        intra_model = (per_robot_models or {}).get(data.robot, model)
        constraints.extend(
            intra_robot_closures(
                data, intra_model, params, cfg,
                candidates=(intra_cands or {}).get(data.robot),
            )
        )

    for a in range(len(robots)):
        for b in range(a + 1, len(robots)):
            key = (robots[a].robot, robots[b].robot)
            constraints.extend(
                inter_robot_closures(
                    robots[a], robots[b], model, params, cfg,
                    candidates=(inter_cands or {}).get(key),
                )
            )

    return PoseGraphProblem(
        nodes=tuple(nodes),
        initial=np.array(initial, dtype=float),
        constraints=tuple(constraints),
        distance_huber_delta_m=cfg.huber_delta_m,
    )
