import math

import numpy as np
import pytest

from radioslam.constraints import (
    VARIANCE_FLOOR_M2,
    Distance,
    LoopClosureConfig,
    NodeId,
    OdomInfoParams,
    PosePrior,
    RelativePose,
    RobotData,
    build_problem,
    inter_candidates,
    inter_robot_closures,
    intra_candidates,
    intra_robot_closures,
    odometry_constraints,
)
from radioslam.distance_model import ModelBin, SimilarityDistanceModel
from radioslam.errors import ConfigError, DataError
from radioslam.fingerprint import Fingerprint
from radioslam.similarity import SimilarityParams

PARAMS = SimilarityParams()


def make_fp(entries, robot=0, index=0, t=0.0, scan_count=10):
    return Fingerprint(
        robot_id=robot, index=index, timestamp=t, entries=dict(entries), scan_count=scan_count
    )


def two_level_model():
    # s = 1 (identical fingerprints) predicts 3 m; s = 0 (disjoint) predicts
    # 50 m. Everything in between falls back to the nearest of the two bins.
    return SimilarityDistanceModel(
        r=0.05,
        bins=(
            ModelBin(center=0.025, d_hat=50.0, var=1.0, count=5),
            ModelBin(center=0.975, d_hat=3.0, var=4.0, count=5),
        ),
        max_training_path_m=100.0,
    )


FP_A = {"ap0": (-50.0, 1.0), "ap1": (-60.0, 0.8)}
FP_B = {"ap8": (-55.0, 1.0), "ap9": (-62.0, 0.6)}  # disjoint from FP_A


def line_data(entries_per_node, robot=0, spacing=60.0):
    poses = np.array(
        [[k * spacing, 0.0, 0.0] for k in range(len(entries_per_node))]
    )
    fps = tuple(
        make_fp(e, robot=robot, index=k, t=5.0 * k)
        for k, e in enumerate(entries_per_node)
    )
    return RobotData(robot=robot, poses=poses, fingerprints=fps)


# ------------------------------------------------------------ edge types


def test_edge_invariants_enforced():
    n0, n1 = NodeId(0, 0), NodeId(0, 1)
    info = np.eye(3)
    with pytest.raises(DataError):
        RelativePose(i=n0, j=n0, z=(0.0, 0.0, 0.0), info=info)
    with pytest.raises(DataError):
        Distance(i=n0, j=n0, d=1.0, w=1.0)
    with pytest.raises(DataError):
        Distance(i=n0, j=n1, d=-0.1, w=1.0)
    with pytest.raises(DataError):
        Distance(i=n0, j=n1, d=1.0, w=0.0)


def test_config_validation():
    with pytest.raises(ConfigError):
        LoopClosureConfig(nu_s=-1.0)
    with pytest.raises(ConfigError):
        LoopClosureConfig(huber_delta_m=0.0)
    with pytest.raises(ConfigError):
        OdomInfoParams(trans_per_m=0.0)


# ------------------------------------------------------------- odometry


def test_odometry_forward_step():
    edges = odometry_constraints(
        0, np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]), OdomInfoParams()
    )
    assert len(edges) == 1
    e = edges[0]
    assert e.i == NodeId(0, 0) and e.j == NodeId(0, 1)
    assert e.z == pytest.approx((1.0, 0.0, 0.0))


def test_odometry_motion_in_rotated_frame():
    poses = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, math.pi / 2], [0.0, 1.0, math.pi / 2]])
    edges = odometry_constraints(0, poses, OdomInfoParams())
    assert len(edges) == 2
    assert edges[0].z == pytest.approx((0.0, 0.0, math.pi / 2))
    # Moving +1 in world y while facing +y is a pure forward step.
    assert edges[1].z == pytest.approx((1.0, 0.0, 0.0), abs=1e-12)


def test_odometry_stationary_and_single_pose():
    poses = np.array([[2.0, 3.0, 0.4], [2.0, 3.0, 0.4]])
    edges = odometry_constraints(0, poses, OdomInfoParams())
    assert edges[0].z == pytest.approx((0.0, 0.0, 0.0), abs=1e-12)
    assert odometry_constraints(0, np.array([[0.0, 0.0, 0.0]]), OdomInfoParams()) == []


def test_odometry_info_matrix_values():
    noise = OdomInfoParams(trans_per_m=0.05, trans_floor_m=0.01, rot_per_rad=0.05, rot_per_m=0.002)
    edges = odometry_constraints(
        0, np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]), noise
    )
    info = edges[0].info
    sigma_xy = 0.05 * 1.0 + 0.01
    sigma_th = 0.002 * 1.0
    assert info[0, 0] == pytest.approx(sigma_xy**-2)
    assert info[1, 1] == pytest.approx(sigma_xy**-2)
    assert info[2, 2] == pytest.approx(sigma_th**-2)
    assert np.all(info == np.diag(np.diag(info)))
    assert np.all(np.linalg.eigvalsh(info) > 0)


def test_odometry_rotation_sigma_floor():
    # A zero-motion step would give sigma_theta = 0; the floor keeps the
    # information finite.
    noise = OdomInfoParams()
    sigma_xy, sigma_th = noise.step_sigmas(0.0, 0.0, 0.0)
    assert sigma_th >= 1e-4
    assert sigma_xy == pytest.approx(noise.trans_floor_m)


# ------------------------------------------------------ intra closures


def test_intra_zero_threshold_is_empty():
    data = line_data([FP_A, FP_A, FP_A])
    cfg = LoopClosureConfig(nu_s=0.0, nu_p=0.0)
    assert intra_robot_closures(data, two_level_model(), PARAMS, cfg) == []


def test_intra_strict_inequality():
    data = line_data([FP_A, FP_A, FP_A])  # pair (2,0) has path 120 > 100
    cfg = LoopClosureConfig(nu_s=3.0, nu_p=0.0)  # d_hat == 3 is not < 3
    assert intra_robot_closures(data, two_level_model(), PARAMS, cfg) == []
    cfg = LoopClosureConfig(nu_s=3.0000001, nu_p=0.0)
    assert len(intra_robot_closures(data, two_level_model(), PARAMS, cfg)) == 1


def test_intra_separation_gate():
    data = line_data([FP_A, FP_A], spacing=50.0)  # path 50 < 100: never a pair
    cfg = LoopClosureConfig(nu_s=100.0)
    assert intra_robot_closures(data, two_level_model(), PARAMS, cfg) == []


def test_intra_edge_values_and_weight():
    data = line_data([FP_A, FP_A, FP_A])
    cfg = LoopClosureConfig(nu_s=10.0)
    edges = intra_robot_closures(data, two_level_model(), PARAMS, cfg)
    assert len(edges) == 1
    e = edges[0]
    assert e.i == NodeId(0, 2) and e.j == NodeId(0, 0)
    assert e.d == pytest.approx(3.0)
    assert e.w == pytest.approx(1.0 / 4.0)  # var 4 above the floor


def test_intra_weight_floor():
    model = SimilarityDistanceModel(
        r=0.05,
        bins=(ModelBin(center=0.975, d_hat=3.0, var=0.0, count=1),),
        max_training_path_m=100.0,
    )
    data = line_data([FP_A, FP_A, FP_A])
    edges = intra_robot_closures(data, model, PARAMS, LoopClosureConfig(nu_s=10.0))
    assert edges[0].w == pytest.approx(1.0 / VARIANCE_FLOOR_M2)


def test_intra_candidate_injection_matches_recompute():
    data = line_data([FP_A, FP_A, FP_B, FP_A])
    model = two_level_model()
    cfg = LoopClosureConfig(nu_s=4.0)
    cands = intra_candidates(data, model, PARAMS, cfg.min_path_separation_m)
    direct = intra_robot_closures(data, model, PARAMS, cfg)
    injected = intra_robot_closures(data, model, PARAMS, cfg, candidates=cands)
    assert direct == injected


def test_intra_threshold_monotonicity():
    data = line_data([FP_A, FP_A, FP_B, FP_A, FP_B, FP_A])
    model = two_level_model()
    prev = set()
    for nu in (0.0, 2.0, 3.5, 10.0, 60.0):
        edges = intra_robot_closures(
            data, model, PARAMS, LoopClosureConfig(nu_s=nu)
        )
        cur = {(e.i, e.j) for e in edges}
        assert prev <= cur
        assert all(e.d < nu and e.w > 0 for e in edges)
        prev = cur


# ------------------------------------------------------ inter closures


def test_inter_zero_threshold_and_distinct_robots():
    a = line_data([FP_A, FP_A], robot=0)
    b = line_data([FP_A, FP_A], robot=1)
    assert inter_robot_closures(a, b, two_level_model(), PARAMS, LoopClosureConfig(nu_p=0.0)) == []
    with pytest.raises(DataError):
        inter_robot_closures(a, a, two_level_model(), PARAMS, LoopClosureConfig())


def test_inter_identical_streams_all_cross_pairs():
    # 3x3 identical fingerprints, no separation gate: every cross pair whose
    # d_hat (= 3 m) passes nu_p produces exactly one edge.
    a = line_data([FP_A, FP_A, FP_A], robot=0)
    b = line_data([FP_A, FP_A, FP_A], robot=1)
    edges = inter_robot_closures(a, b, two_level_model(), PARAMS, LoopClosureConfig(nu_p=5.0))
    assert len(edges) == 9
    assert {(e.i.robot, e.j.robot) for e in edges} == {(0, 1)}
    assert all(e.d == pytest.approx(3.0) for e in edges)
    got = [(e.i.t, e.j.t) for e in edges]
    assert got == [(i, j) for i in range(3) for j in range(3)]


def test_inter_disjoint_aps_uses_low_similarity_bin():
    a = line_data([FP_A], robot=0)
    b = line_data([FP_B], robot=1)
    model = two_level_model()
    assert inter_robot_closures(a, b, model, PARAMS, LoopClosureConfig(nu_p=5.0)) == []
    edges = inter_robot_closures(a, b, model, PARAMS, LoopClosureConfig(nu_p=60.0))
    assert len(edges) == 1
    assert edges[0].d == pytest.approx(50.0)


def test_inter_mixed_vocabularies_work_from_raw_lists():
    # The two robots see different AP unions; scoring must still work when
    # called without precomputed candidates.
    a = line_data([FP_A, {"ap0": (-50.0, 1.0)}], robot=0)
    b = line_data([FP_B, FP_A], robot=1)
    edges = inter_robot_closures(a, b, two_level_model(), PARAMS, LoopClosureConfig(nu_p=5.0))
    assert [(e.i.t, e.j.t) for e in edges] == [(0, 1)]


def test_inter_candidate_injection_matches_recompute():
    a = line_data([FP_A, FP_B], robot=0)
    b = line_data([FP_B, FP_A], robot=1)
    model = two_level_model()
    cfg = LoopClosureConfig(nu_p=4.0)
    cands = inter_candidates(a, b, model, PARAMS)
    assert inter_robot_closures(a, b, model, PARAMS, cfg) == inter_robot_closures(
        a, b, model, PARAMS, cfg, candidates=cands
    )


# -------------------------------------------------------- build_problem


def test_single_robot_nu_zero_problem_shape():
    data = line_data([FP_A, FP_A, FP_A])
    problem = build_problem(
        [data], two_level_model(), PARAMS, LoopClosureConfig(nu_s=0.0, nu_p=0.0)
    )
    kinds = [type(c).__name__ for c in problem.constraints]
    assert kinds.count("PosePrior") == 1
    assert kinds.count("RelativePose") == 2
    assert kinds.count("Distance") == 0
    assert problem.nodes == (NodeId(0, 0), NodeId(0, 1), NodeId(0, 2))
    # Default anchor is the first odometry pose: initial values are the
    # odometry bit-for-bit.
    assert np.array_equal(problem.initial, data.poses)


def test_two_robots_disconnected_chains():
    a = line_data([FP_A, FP_A], robot=0)
    b = line_data([FP_B, FP_B], robot=1)
    problem = build_problem(
        [a, b], two_level_model(), PARAMS, LoopClosureConfig(nu_s=0.0, nu_p=0.0)
    )
    kinds = [type(c).__name__ for c in problem.constraints]
    assert kinds.count("PosePrior") == 2
    assert kinds.count("RelativePose") == 2
    assert kinds.count("Distance") == 0
    assert len(problem.nodes) == 4


def test_anchor_re_expresses_odometry():
    data = line_data([FP_A, FP_A, FP_A])
    anchor = (10.0, -5.0, math.pi / 2)
    problem = build_problem(
        [data],
        two_level_model(),
        PARAMS,
        LoopClosureConfig(nu_s=0.0, nu_p=0.0),
        anchors={0: anchor},
    )
    assert problem.initial[0] == pytest.approx(anchor, abs=1e-12)
    # The whole chain is rigidly moved: successive nodes step +60 m along the
    # anchor heading (+y here).
    assert problem.initial[1] == pytest.approx((10.0, 55.0, math.pi / 2), abs=1e-9)
    assert problem.initial[2] == pytest.approx((10.0, 115.0, math.pi / 2), abs=1e-9)
    prior = [c for c in problem.constraints if isinstance(c, PosePrior)][0]
    assert prior.z == pytest.approx(anchor)
    assert prior.info[0, 0] == pytest.approx(1e6)


def test_duplicate_robot_ids_rejected():
    a = line_data([FP_A], robot=0)
    with pytest.raises(DataError):
        build_problem([a, a], two_level_model(), PARAMS, LoopClosureConfig())
    with pytest.raises(DataError):
        build_problem([], two_level_model(), PARAMS, LoopClosureConfig())


def test_problem_counts_match_hand_enumeration():
    # Robot 0: nodes at x = 0, 60, 120, 180. Path-gated pairs (>100 m):
    # (2,0), (3,0), (3,1). Fingerprints: A A B A, so (3,0) and (3,1) score
    # 1.0 -> 3 m; (2,0) is a disjoint pair -> 50 m.
    a = line_data([FP_A, FP_A, FP_B, FP_A], robot=0)
    # Robot 1: two nodes, identical to A at node 0, disjoint at node 1.
    b = line_data([FP_A, FP_B], robot=1)
    cfg = LoopClosureConfig(nu_s=5.0, nu_p=5.0)
    problem = build_problem([a, b], two_level_model(), PARAMS, cfg)
    dist = [c for c in problem.constraints if isinstance(c, Distance)]
    intra = [e for e in dist if e.i.robot == e.j.robot]
    inter = [e for e in dist if e.i.robot != e.j.robot]
    assert [(e.i.t, e.j.t) for e in intra] == [(3, 0), (3, 1)]
    # Cross pairs scoring 1.0: robot-0 nodes {0, 1, 3} (entries A) x robot-1
    # node 0, plus robot-0 node 2 (entries B) x robot-1 node 1.
    assert [(e.i.t, e.j.t) for e in inter] == [(0, 0), (1, 0), (2, 1), (3, 0)]
    kinds = [type(c).__name__ for c in problem.constraints]
    assert kinds.count("PosePrior") == 2
    assert kinds.count("RelativePose") == 3 + 1


def test_per_robot_models_split_intra_from_inter():
    # The per-robot model predicts 2 m at s = 1; the pooled model predicts
    # 3 m. Intra edges must use the former, inter edges the latter.
    own = SimilarityDistanceModel(
        r=0.05,
        bins=(ModelBin(center=0.975, d_hat=2.0, var=1.0, count=2),),
        max_training_path_m=100.0,
    )
    a = line_data([FP_A, FP_A, FP_A], robot=0)
    b = line_data([FP_A], robot=1)
    cfg = LoopClosureConfig(nu_s=5.0, nu_p=5.0)
    problem = build_problem(
        [a, b], two_level_model(), PARAMS, cfg,
        per_robot_models={0: own},
    )
    dist = [c for c in problem.constraints if isinstance(c, Distance)]
    intra = [e for e in dist if e.i.robot == e.j.robot]
    inter = [e for e in dist if e.i.robot != e.j.robot]
    assert all(e.d == pytest.approx(2.0) for e in intra) and intra
    assert all(e.d == pytest.approx(3.0) for e in inter) and inter


def test_candidate_injection_takes_precedence():
    a = line_data([FP_A, FP_A, FP_A], robot=0)
    model = two_level_model()
    cfg = LoopClosureConfig(nu_s=5.0, nu_p=0.0)
    # Fake candidate list: one pair with d_hat below the gate that a real
    # similarity pass would not produce.
    problem = build_problem(
        [a], model, PARAMS, cfg, intra_cands={0: [(1, 0, 1.5, 9.0)]}
    )
    dist = [c for c in problem.constraints if isinstance(c, Distance)]
    assert [(e.i.t, e.j.t, e.d) for e in dist] == [(1, 0, 1.5)]


def test_robot_data_validation():
    with pytest.raises(DataError):
        RobotData(robot=0, poses=np.zeros((0, 3)), fingerprints=())
    with pytest.raises(DataError):
        RobotData(robot=0, poses=np.zeros((2, 3)), fingerprints=(make_fp(FP_A),))
    with pytest.raises(DataError):
        RobotData(
            robot=0,
            poses=np.zeros((1, 3)),
            fingerprints=(make_fp(FP_A),),
            arc=np.zeros(2),
        )
