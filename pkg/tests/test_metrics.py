import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_rotation
from hps.errors import NotSPD, ShapeMismatch
from hps.inertia import InertialParams, Pose, part_params_sensor, pseudoinertia, vech
from hps.metrics import SegPair, gce, riemannian_error, size_errors, use_error

labels = st.lists(st.integers(0, 4), min_size=1, max_size=60)


def brute_use(pred, truth):
    n = len(pred)
    bleed = 0
    for s in set(pred):
        members = [t for p, t in zip(pred, truth) if p == s]
        bleed += len(members) - max(members.count(t) for t in set(members))
    return bleed / n


def brute_gce(pred, truth):
    n = len(pred)
    def E(s1, s2, i):
        R1 = {j for j in range(n) if s1[j] == s1[i]}
        R2 = {j for j in range(n) if s2[j] == s2[i]}
        return len(R1 - R2) / len(R1)
    return min(sum(E(pred, truth, i) for i in range(n)), sum(E(truth, pred, i) for i in range(n))) / n


def random_body(rng):
    P = rng.normal(size=(40, 3)) * rng.uniform(0.02, 0.2, 3)
    pose = Pose(random_rotation(rng), rng.normal(size=3) * 0.1)
    return part_params_sensor(P, rng.uniform(0.1, 5), pose)


# ----------------------------------------------------------------- use / gce


def test_segmentation_metric_examples():
    t = [0, 0, 1, 1]
    assert use_error(SegPair(t, t)) == 0 and gce(SegPair(t, t)) == 0
    assert use_error(SegPair([0, 1, 2, 2], t)) == 0
    assert use_error(SegPair([0, 0, 0, 1], t)) == 0.25
    assert gce(SegPair([0, 1, 0, 1], t)) == 0.5


def test_segpair_validation():
    with pytest.raises(ShapeMismatch):
        SegPair([0, 1], [0])
    with pytest.raises(ShapeMismatch):
        SegPair([], [])


@settings(max_examples=80, deadline=None)
@given(labels, st.data())
def test_metrics_match_brute_force(pred, data):
    truth = data.draw(st.lists(st.integers(0, 3), min_size=len(pred), max_size=len(pred)))
    pair = SegPair(pred, truth)
    assert use_error(pair) == pytest.approx(brute_use(pred, truth))
    assert gce(pair) == pytest.approx(brute_gce(pred, truth))
    assert 0 <= use_error(pair) <= 1 and 0 <= gce(pair) <= 1


@settings(max_examples=60, deadline=None)
@given(labels, st.permutations(range(5)))
def test_metrics_label_permutation_and_refinement(truth, perm):
    t = np.array(truth)
    pair = SegPair(np.array(perm)[t], t)
    assert use_error(pair) == 0 and gce(pair) == 0
    refined = t * 100 + np.arange(len(t)) % 3  # split every truth region further
    assert use_error(SegPair(refined, t)) == 0 and gce(SegPair(refined, t)) == 0
    assert gce(SegPair(t, refined)) == 0


# ---------------------------------------------------------------- riemannian


def test_riemannian_examples():
    rng = np.random.default_rng(0)
    a = random_body(rng)
    assert riemannian_error(a, a) == pytest.approx(0, abs=1e-12)
    # P(est) = e^2 P(gt): mass, first and second moments all scale by e^2 (com unchanged)
    k = np.e**2
    b = InertialParams(k * a.mass, a.com, k * a.inertia_vech)
    assert np.allclose(pseudoinertia(b), k * pseudoinertia(a))
    assert riemannian_error(b, a) == pytest.approx(np.sqrt(8))


def test_riemannian_not_spd():
    a = InertialParams(1.0, np.zeros(3), vech(np.eye(3) / 6))
    bad = InertialParams(1.0, np.zeros(3), vech(np.diag([10, 0.1, 0.1])))
    with pytest.raises(NotSPD):
        riemannian_error(bad, a)
    with pytest.raises(NotSPD):
        riemannian_error(a, bad)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_riemannian_symmetric_positive(seed):
    rng = np.random.default_rng(seed)
    a, b = random_body(rng), random_body(rng)
    d = riemannian_error(a, b)
    assert d == pytest.approx(riemannian_error(b, a), rel=1e-9, abs=1e-12)
    assert d > 0


# --------------------------------------------------------------- size errors


def test_size_error_examples():
    gt = InertialParams(1.0, [0, 0, 0], vech(np.eye(3) * 0.01))
    e = size_errors(gt, gt, [0.1, 0.1, 0.1])
    assert e["e_m"] == 0 and not e["e_C"].any() and not e["e_J"].any()
    est = InertialParams(1.01, [0.01, 0, 0], gt.inertia_vech)
    e = size_errors(est, gt, [0.1, 0.2, 0.3])
    assert e["e_m"] == pytest.approx(1.0)
    assert e["e_C"][0] == pytest.approx(10.0)


def test_size_error_inertia_normalizer():
    gt = InertialParams(2.0, np.zeros(3), np.zeros(6))
    d = np.array([1, 2, 3, 4, 5, 6]) * 1e-4
    e = size_errors(InertialParams(2.0, np.zeros(3), d), gt, [0.1, 0.2, 0.3])["e_J"]
    # Ixx over m*ey*ez, Ixy over m*ex*ey, ..., Izz over m*ex*ey
    norm = 2.0 * np.array([0.2 * 0.3, 0.1 * 0.2, 0.1 * 0.3, 0.1 * 0.3, 0.2 * 0.3, 0.1 * 0.2])
    assert np.allclose(e, 100 * d / norm)


def test_size_error_validation():
    gt = InertialParams(0.0, np.zeros(3), np.zeros(6))
    with pytest.raises(ValueError):
        size_errors(gt, gt, [1, 1, 1])
    gt = InertialParams(1.0, np.zeros(3), np.zeros(6))
    with pytest.raises(ValueError):
        size_errors(gt, gt, [1, 0, 1])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.permutations(range(3)))
def test_size_errors_invariant_under_axis_permutation(seed, perm):
    rng = np.random.default_rng(seed)
    gt, est = random_body(rng), random_body(rng)
    ext = rng.uniform(0.05, 0.3, 3)
    Pm = np.eye(3)[list(perm)]
    if np.linalg.det(Pm) < 0:
        Pm[0] *= -1  # keep it a rotation; sign flips do not change magnitudes
    rot = lambda p: InertialParams(p.mass, Pm @ p.com, vech(Pm @ p.inertia @ Pm.T))  # noqa: E731
    a = size_errors(est, gt, ext)
    b = size_errors(rot(est), rot(gt), np.abs(Pm) @ ext)
    assert b["e_m"] == pytest.approx(a["e_m"])
    assert b["e_C_mean"] == pytest.approx(a["e_C_mean"])
    assert b["e_J_mean"] == pytest.approx(a["e_J_mean"])
