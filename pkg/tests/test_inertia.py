import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_rotation
from hps.errors import EmptyPart, FrameMismatch, ZeroTotalMass
from hps.inertia import (InertialParams, Pose, centroid, compose, is_consistent, part_params_sensor,
                         point_inertia, pseudoinertia, transform_params, unvech, vech)

vec3 = arrays(np.float64, 3, elements=st.floats(-2, 2, allow_nan=False))
clouds = arrays(np.float64, st.tuples(st.integers(1, 30), st.just(3)), elements=st.floats(-1, 1, allow_nan=False))


def brute_inertia(P, masses):
    """Direct sum of m (|p|^2 E - p p^T); independent of the centred formula."""
    return sum(m * (p @ p * np.eye(3) - np.outer(p, p)) for p, m in zip(P, masses))


def cube_grid(n):
    g = (np.arange(n) + 0.5) / n - 0.5
    return np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)


# ------------------------------------------------------------------ centroid


def test_centroid_examples():
    assert np.allclose(centroid([[1, 0, 0], [-1, 0, 0]]), 0)
    assert np.allclose(centroid([[0.3, -2, 5]]), [0.3, -2, 5])
    corners = np.array([[x, y, z] for x in (0, 2) for y in (0, 2) for z in (0, 2)], float)
    assert np.allclose(centroid(corners), [1, 1, 1])
    with pytest.raises(EmptyPart):
        centroid(np.zeros((0, 3)))


# ------------------------------------------------------------- point inertia


def test_point_inertia_examples():
    assert np.allclose(point_inertia([1, 0, 0], 1.0), np.diag([0, 1, 1]))
    assert np.allclose(point_inertia([0, 0, 0], 3.0), 0)


@settings(max_examples=60, deadline=None)
@given(vec3, st.floats(0, 10))
def test_point_inertia_identity_and_psd(p, m):
    J = point_inertia(p, m)
    assert np.allclose(J, m * (p @ p * np.eye(3) - np.outer(p, p)), atol=1e-12)
    assert np.allclose(J, J.T)
    assert np.linalg.eigvalsh(J).min() >= -1e-12 * max(1.0, m * (p @ p))


# ------------------------------------------------------------ sensor params


def test_part_params_origin_point():
    pp = part_params_sensor([[0, 0, 0]], 2.0, Pose.identity())
    assert pp.mass == 2.0 and np.allclose(pp.com, 0) and np.allclose(pp.inertia_vech, 0)


def test_part_params_dense_cube():
    pp = part_params_sensor(cube_grid(64), 1.0, Pose.identity())
    assert np.allclose(np.diag(pp.inertia), 1 / 6, rtol=0.02)
    assert np.allclose(pp.inertia - np.diag(np.diag(pp.inertia)), 0, atol=1e-12)


def test_part_params_cube_rotation_symmetry():
    P = cube_grid(16)
    Rz = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]], float)
    a = part_params_sensor(P, 1.0, Pose.identity())
    b = part_params_sensor(P, 1.0, Pose(Rz, np.zeros(3)))
    assert np.allclose(a.inertia_vech, b.inertia_vech, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(clouds, st.floats(0.01, 5), st.integers(0, 2**31 - 1), vec3)
def test_part_params_matches_pointwise_recomputation(P, m, seed, t):
    pose = Pose(random_rotation(np.random.default_rng(seed)), t)
    pp = part_params_sensor(P, m, pose)
    Ps = pose.apply(P)
    assert np.allclose(pp.com, Ps.mean(0), atol=1e-12)
    assert np.allclose(pp.inertia, brute_inertia(Ps, np.full(len(P), m / len(P))), atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(clouds, st.floats(0.01, 5), vec3)
def test_parallel_axis_coherence(P, m, t):
    direct = part_params_sensor(P, m, Pose(np.eye(3), t))
    shifted = transform_params(part_params_sensor(P, m, Pose.identity()), Pose(np.eye(3), t))
    assert np.allclose(direct.phi, shifted.phi, atol=1e-9)


# ------------------------------------------------------------------- compose


def test_compose_examples():
    a = InertialParams(1.0, [1, 0, 0], vech(point_inertia([1, 0, 0], 1.0)))
    b = InertialParams(1.0, [-1, 0, 0], vech(point_inertia([-1, 0, 0], 1.0)))
    c = compose([a, b])
    assert np.allclose(c.com, 0) and np.allclose(np.diag(c.inertia), [0, 2, 2])
    assert compose([a]).phi == pytest.approx(a.phi)


def test_compose_cube_halves():
    P = cube_grid(8)
    whole = part_params_sensor(P, 1.0, Pose.identity())
    left, right = P[P[:, 0] < 0], P[P[:, 0] > 0]
    halves = compose([part_params_sensor(left, 0.5, Pose.identity()), part_params_sensor(right, 0.5, Pose.identity())])
    assert np.allclose(halves.phi, whole.phi, atol=1e-9)


def test_compose_errors():
    a = InertialParams(1.0, np.zeros(3), np.zeros(6), "sensor")
    with pytest.raises(FrameMismatch):
        compose([a, InertialParams(1.0, np.zeros(3), np.zeros(6), "object")])
    with pytest.raises(ZeroTotalMass):
        compose([InertialParams(0.0, np.zeros(3), np.zeros(6))])


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(4, 60), st.just(3)), elements=st.floats(-1, 1, allow_nan=False)),
       st.integers(0, 2**31 - 1), st.floats(0.1, 10))
def test_over_segmentation_invariance(P, seed, m):
    rng = np.random.default_rng(seed)
    pose = Pose(random_rotation(rng), rng.normal(size=3))
    k = int(rng.integers(1, min(6, len(P)) + 1))
    lab = np.r_[np.arange(k), rng.integers(0, k, len(P) - k)]
    whole = part_params_sensor(P, m, pose)
    parts = [part_params_sensor(P[lab == i], m * np.mean(lab == i), pose) for i in range(k)]
    c = compose(parts)
    scale = max(np.abs(whole.phi).max(), 1e-12)
    assert np.abs(c.phi - whole.phi).max() / scale < 1e-9


# ---------------------------------------------------------- pseudo-inertia


def test_pseudoinertia_examples():
    assert np.allclose(pseudoinertia(InertialParams(1.0, np.zeros(3), np.zeros(6))), np.diag([0, 0, 0, 1]))
    P = pseudoinertia(InertialParams(1.0, np.zeros(3), vech(np.eye(3) / 6)))
    assert np.allclose(P[:3, :3], np.eye(3) / 12)
    assert np.allclose(pseudoinertia(InertialParams(0.0, np.zeros(3), np.zeros(6))), 0)


def test_pseudoinertia_is_second_moment():
    rng = np.random.default_rng(3)
    P = rng.normal(size=(50, 3))
    w = rng.random(50)
    pp = InertialParams(w.sum(), w @ P / w.sum(), vech(brute_inertia(P, w)))
    Ph = np.c_[P, np.ones(50)]
    assert np.allclose(pseudoinertia(pp), (Ph * w[:, None]).T @ Ph)


def test_is_consistent_examples():
    assert is_consistent(part_params_sensor(cube_grid(6), 1.0, Pose.identity()))
    assert not is_consistent(InertialParams(-1.0, np.zeros(3), vech(np.eye(3))))
    assert not is_consistent(InertialParams(1.0, np.zeros(3), vech(np.diag([10, 0.1, 0.1]))))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 6, elements=st.floats(-1, 1, allow_nan=False)))
def test_vech_round_trip(v):
    assert np.array_equal(vech(unvech(v)), v)
    M = unvech(v)
    assert np.array_equal(M, M.T)


def test_pose_validation_and_round_trip():
    with pytest.raises(ValueError):
        Pose(np.diag([1, 1, -1.0]), np.zeros(3))
    p = Pose(random_rotation(np.random.default_rng(0)), [1, 2, 3])
    q = Pose.from_dict(p.to_dict())
    assert np.allclose(q.rotation, p.rotation) and np.allclose((p @ p.inverse()).rotation, np.eye(3))


def test_params_json_round_trip():
    a = InertialParams(1.5, [0.1, 0.2, 0.3], [1, 2, 3, 4, 5, 6], "sensor")
    b = InertialParams.from_dict(a.to_dict())
    assert np.array_equal(a.phi, b.phi) and a.frame == b.frame
