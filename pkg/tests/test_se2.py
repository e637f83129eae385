import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radioslam.se2 import (
    Pose2,
    compose,
    compose_increments,
    inverse,
    normalize_angle,
    normalize_angles,
    path_lengths,
    relative,
    relative_increments,
)

angles = st.floats(-50.0, 50.0, allow_nan=False)
coords = st.floats(-1e3, 1e3, allow_nan=False)
poses = st.builds(Pose2, coords, coords, angles)


def test_normalize_angle_range_and_boundary():
    assert normalize_angle(math.pi) == math.pi
    assert normalize_angle(-math.pi) == math.pi
    assert normalize_angle(3 * math.pi) == pytest.approx(math.pi)
    assert normalize_angle(0.0) == 0.0


@given(angles)
def test_normalize_angle_idempotent_and_in_range(t):
    w = normalize_angle(t)
    assert -math.pi < w <= math.pi
    assert normalize_angle(w) == w
    # same point on the circle
    assert math.isclose(math.cos(w), math.cos(t), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(t), abs_tol=1e-9)


@given(st.lists(angles, min_size=1, max_size=20))
def test_normalize_angles_matches_scalar(ts):
    vec = normalize_angles(np.array(ts))
    for v, t in zip(vec, ts):
        assert v == normalize_angle(t)


def test_compose_translation_only():
    a = Pose2(1.0, 2.0, 0.0)
    b = Pose2(3.0, 0.0, 0.0)
    c = compose(a, b)
    assert (c.x, c.y, c.theta) == (4.0, 2.0, 0.0)


def test_compose_quarter_turn():
    a = Pose2(0.0, 0.0, math.pi / 2)
    b = Pose2(1.0, 0.0, 0.0)
    c = compose(a, b)
    assert c.x == pytest.approx(0.0, abs=1e-15)
    assert c.y == pytest.approx(1.0)


@given(poses)
def test_inverse_cancels(a):
    e = compose(a, inverse(a))
    assert abs(e.x) < 1e-9
    assert abs(e.y) < 1e-9
    assert abs(e.theta) < 1e-9 or abs(abs(e.theta) - 2 * math.pi) < 1e-9


@given(poses, poses)
def test_relative_recomposes(a, b):
    r = relative(a, b)
    back = compose(a, r)
    assert back.x == pytest.approx(b.x, abs=1e-6)
    assert back.y == pytest.approx(b.y, abs=1e-6)
    assert math.cos(back.theta) == pytest.approx(math.cos(b.theta), abs=1e-9)
    assert math.sin(back.theta) == pytest.approx(math.sin(b.theta), abs=1e-9)


@given(poses, poses, poses)
@settings(max_examples=200)
def test_compose_associative(a, b, c):
    lhs = compose(compose(a, b), c)
    rhs = compose(a, compose(b, c))
    assert lhs.x == pytest.approx(rhs.x, rel=1e-9, abs=1e-6)
    assert lhs.y == pytest.approx(rhs.y, rel=1e-9, abs=1e-6)
    assert math.cos(lhs.theta) == pytest.approx(math.cos(rhs.theta), abs=1e-9)


@given(
    st.lists(
        st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2)),
        min_size=1,
        max_size=30,
    ),
    poses,
)
def test_increment_round_trip(incs, start):
    incs = np.array(incs, dtype=float)
    traj = compose_increments(start, incs)
    assert traj.shape == (len(incs) + 1, 3)
    back = relative_increments(traj)
    assert np.allclose(back[:, :2], incs[:, :2], atol=1e-8)
    assert np.allclose(np.cos(back[:, 2]), np.cos(incs[:, 2]), atol=1e-9)
    assert np.allclose(np.sin(back[:, 2]), np.sin(incs[:, 2]), atol=1e-9)


def test_relative_increments_matches_scalar_relative():
    rng = np.random.default_rng(3)
    traj = rng.normal(size=(12, 3))
    incs = relative_increments(traj)
    for k in range(1, len(traj)):
        r = relative(Pose2.from_array(traj[k - 1]), Pose2.from_array(traj[k]))
        assert incs[k - 1, 0] == pytest.approx(r.x, abs=1e-12)
        assert incs[k - 1, 1] == pytest.approx(r.y, abs=1e-12)
        assert incs[k - 1, 2] == pytest.approx(r.theta, abs=1e-12)


def test_path_lengths_hand_example():
    traj = np.array([[0.0, 0.0, 0.0], [3.0, 4.0, 0.0], [3.0, 4.0, 1.0], [3.0, 5.0, 1.0]])
    np.testing.assert_allclose(path_lengths(traj), [0.0, 5.0, 5.0, 6.0])


@given(st.integers(2, 40), st.integers(0, 2**31 - 1))
@settings(max_examples=50)
def test_path_lengths_monotone(n, seed):
    traj = np.random.default_rng(seed).normal(size=(n, 3))
    arc = path_lengths(traj)
    assert arc[0] == 0.0
    assert np.all(np.diff(arc) >= 0.0)
