import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hps.errors import DisconnectedComplex, KOutOfRange, MissingNormals
from hps.geom import PointCloud, VoxelGrid, cell_complex, convex_hull, hull_volume
from hps.metrics import SegPair, gce, use_error
from hps.segment import (Cluster, ClusterWeights, SegmentParams, assign_cells, cluster_labels, cut_hierarchy,
                         dissimilarity, htc, htc_edge_cost, initial_clustering, segment_object)


def cluster(p, l, n):
    return Cluster(np.array([0]), 0, np.asarray(p, float), np.asarray(l, float), np.asarray(n, float))


def complex_of(cells):
    return cell_complex(VoxelGrid(np.zeros(3), 1.0, np.asarray(sorted(cells))))


def block(lo, hi):
    return list(itertools.product(*[range(a, b) for a, b in zip(lo, hi)]))


unit = st.floats(-1, 1, allow_nan=False)


# ------------------------------------------------------------ dissimilarity


def test_dissimilarity_examples():
    a = cluster([0, 0, 0], [10, 20, 30], [0, 0, 1])
    assert dissimilarity(a, a, ClusterWeights()) == 0
    b = cluster([0, 0, 0], [10, 20, 30], [0, 0, -1])
    assert dissimilarity(a, b, ClusterWeights()) == 0
    c = cluster([1, 0, 0], [0, 20, 30], [1, 0, 0])
    d = cluster([0, 0, 0], [10, 20, 30], [0, 1, 0])
    assert dissimilarity(c, d, ClusterWeights(1, 0.01, 0.5)) == pytest.approx(1.6)


@settings(max_examples=60, deadline=None)
@given(st.lists(unit, min_size=6, max_size=6), st.lists(st.integers(0, 255), min_size=6, max_size=6),
       st.lists(unit, min_size=6, max_size=6))
def test_dissimilarity_symmetric_nonnegative(p, l, n):
    n1, n2 = np.array(n[:3]) + [0, 0, 2], np.array(n[3:]) + [0, 0, 2]
    a = cluster(p[:3], l[:3], n1 / np.linalg.norm(n1))
    b = cluster(p[3:], l[3:], n2 / np.linalg.norm(n2))
    w = ClusterWeights(1.0, 0.05, 0.5)
    assert dissimilarity(a, b, w) >= 0
    assert dissimilarity(a, b, w) == pytest.approx(dissimilarity(b, a, w))
    assert dissimilarity(a, a, w) == pytest.approx(0, abs=1e-12)


def test_weights_validation():
    with pytest.raises(ValueError):
        ClusterWeights(0, 0, 0)
    with pytest.raises(ValueError):
        ClusterWeights(-1, 0, 1)


# ------------------------------------------------------- initial clustering


def _patch(n, x0, colour, rng):
    p = np.c_[x0 + rng.random(n), rng.random(n), np.zeros(n)]
    return p, np.tile(colour, (n, 1)), np.tile([0, 0, 1.0], (n, 1))


def test_initial_clustering_singletons():
    rng = np.random.default_rng(0)
    cloud = PointCloud(rng.random((50, 3)), normals=np.tile([0, 0, 1.0], (50, 1)))
    cl = initial_clustering(cloud, desired=50)
    assert len(cl) == 50 and sorted(len(c.member_ids) for c in cl) == [1] * 50


def test_initial_clustering_two_patches_by_colour():
    rng = np.random.default_rng(1)
    a = _patch(1000, 0.0, (255, 0, 0), rng)
    b = _patch(1000, 1.5, (0, 0, 255), rng)
    cloud = PointCloud(*[np.vstack([x, y]) for x, y in zip(a, b)])
    lab = cluster_labels(initial_clustering(cloud, ClusterWeights(1, 0.05, 0.5), desired=2), 2000)
    # oracle: connected components of the colour-equality graph
    truth = np.r_[np.zeros(1000, int), np.ones(1000, int)]
    assert use_error(SegPair(lab, truth)) == 0 and len(np.unique(lab)) == 2


def test_initial_clustering_flat_plane_single():
    rng = np.random.default_rng(2)
    p, c, n = _patch(500, 0.0, (100, 100, 100), rng)
    cl = initial_clustering(PointCloud(p, c, n), desired=1)
    assert len(cl) == 1


def test_initial_clustering_partition_and_medoid():
    rng = np.random.default_rng(3)
    p, c, n = _patch(400, 0.0, (100, 100, 100), rng)
    cl = initial_clustering(PointCloud(p, c, n), desired=10)
    ids = np.concatenate([x.member_ids for x in cl])
    assert sorted(ids) == list(range(400))
    for x in cl:
        assert x.rep_index in x.member_ids and np.array_equal(x.rep_position, p[x.rep_index])


def test_initial_clustering_needs_normals():
    with pytest.raises(MissingNormals):
        initial_clustering(PointCloud(np.zeros((5, 3))))


# ------------------------------------------------------------- edge cost


def test_edge_cost_examples():
    assert htc_edge_cost(2, 2, 1, 1, 2) == 0.5
    # (2^2 + 2^2) / 4^2; same size shares as the first case
    assert htc_edge_cost(4, 4, 2, 2, 4) == 0.5
    L = np.array(block((0, 0, 0), (2, 1, 1)) + [(0, 1, 0)], float)
    corners = (L[:, None, :] + np.array(list(itertools.product((0, 1), repeat=3)))[None]).reshape(-1, 3)
    hv = hull_volume(convex_hull(corners))
    assert hv == pytest.approx(3.5)
    assert htc_edge_cost(hv, 3.0, 2, 1, 3) == pytest.approx(1.5)


@settings(max_examples=80, deadline=None)
@given(st.floats(0, 10), st.floats(0, 10), st.integers(1, 50), st.integers(1, 50), st.integers(0, 50))
def test_edge_cost_branches(hv, v, si, sj, extra):
    tol = 1e-9  # htc always passes a positive convexity tolerance
    c = htc_edge_cost(hv, v, si, sj, si + sj + extra, tol)
    assert c >= 0
    if hv - v > tol:
        assert c > 1
    else:
        assert c <= 1


# -------------------------------------------------------------------- htc


def test_htc_convex_block_single_part():
    cx = complex_of(block((0, 0, 0), (4, 4, 4)))
    res = htc(cx, np.arange(cx.n_cells), 1)
    assert set(res.cell_labels) == {0}
    assert not any(m["concave"] for m in res.merge_log)


def test_htc_dumbbell_cubes_and_bar():
    cells = block((0, 0, 0), (4, 4, 4)) + block((4, 2, 0), (8, 3, 1)) + block((8, 0, 0), (12, 4, 4))
    cx = complex_of(cells)
    x = cx.centroids[:, 0]
    truth = np.where(x < 4, 0, np.where(x < 8, 1, 2))
    res = htc(cx, np.arange(cx.n_cells), 3)
    assert use_error(SegPair(res.cell_labels, truth)) <= 0.05


def test_htc_l_shape_splits_at_corner():
    cells = block((0, 0, 0), (6, 2, 2)) + block((0, 2, 0), (2, 6, 2))
    cx = complex_of(cells)
    res = htc(cx, np.arange(cx.n_cells), 2)
    c = cx.centroids
    arm_x = (c[:, 1] < 2)
    arm_y = (c[:, 0] < 2)
    for lab in range(2):
        sel = res.cell_labels == lab
        inside = max(np.mean(arm_x[sel]), np.mean(arm_y[sel]))
        assert inside >= 0.95


def test_htc_l_shape_oracle_corner_split_minimizes_concavity():
    # exhaustive axis-aligned two-part splits: the corner cut has the least summed concavity
    cells = np.array(block((0, 0, 0), (6, 2, 2)) + block((0, 2, 0), (2, 6, 2)))
    def concavity(S):
        corners = (S[:, None, :] + np.array(list(itertools.product((0, 1), repeat=3)))[None]).reshape(-1, 3)
        return hull_volume(convex_hull(corners)) - len(S)
    best = min(((a, t) for a in range(2) for t in range(1, 6)),
               key=lambda at: sum(concavity(cells[m]) for m in (cells[:, at[0]] < at[1], cells[:, at[0]] >= at[1])))
    assert best[1] == 2


def test_htc_disconnected():
    cx = complex_of(block((0, 0, 0), (2, 2, 2)) + block((5, 0, 0), (7, 2, 2)))
    with pytest.raises(DisconnectedComplex):
        htc(cx, np.arange(cx.n_cells), 1)
    assert len(set(htc(cx, np.arange(cx.n_cells), 2).cell_labels)) == 2


def _check_tree(res, n_cells):
    tree = {n.id: n for n in res.tree}
    leaves = [n for n in res.tree if not n.children]
    assert sorted(np.concatenate([n.cell_ids for n in leaves])) == list(range(n_cells))
    for n in res.tree:
        if n.children:
            a, b = (tree[c].cell_ids for c in n.children)
            assert len(np.intersect1d(a, b)) == 0
            assert np.array_equal(np.sort(np.concatenate([a, b])), n.cell_ids)


@settings(max_examples=25, deadline=None)
@given(st.sets(st.tuples(st.integers(0, 4), st.integers(0, 4), st.integers(0, 1)), min_size=2, max_size=30),
       st.integers(1, 4))
def test_htc_tree_and_labels(cells, k):
    cells = sorted(cells)
    cx = complex_of(cells)
    try:
        res = htc(cx, np.arange(cx.n_cells), k)
    except (DisconnectedComplex, KOutOfRange):
        return
    _check_tree(res, cx.n_cells)
    lab = res.cell_labels
    assert lab.min() == 0 and lab.max() == res.n_parts - 1
    assert res.n_parts == min(k, cx.n_cells)


def test_htc_no_convex_option_left_at_first_concave_merge():
    """Replay the log: when the first concave merge fires, every adjacent pair has a concave union."""
    cells = block((0, 0, 0), (6, 2, 2)) + block((0, 2, 0), (2, 6, 2)) + block((4, 2, 0), (6, 4, 2))
    cx = complex_of(cells)
    res = htc(cx, np.arange(cx.n_cells), 1)
    first = [m["concave"] for m in res.merge_log].index(True)
    lab = cut_hierarchy(res.tree, cx.n_cells - first)
    corners = cx.corners
    pairs = {tuple(sorted((lab[i], lab[j]))) for i, j in cx.adjacency if lab[i] != lab[j]}
    assert pairs
    for a, b in pairs:
        sel = (lab == a) | (lab == b)
        hv = hull_volume(convex_hull(corners[sel].reshape(-1, 3)))
        assert hv - sel.sum() > 1e-9


def test_htc_deterministic():
    cells = block((0, 0, 0), (6, 2, 2)) + block((0, 2, 0), (2, 6, 2))
    cx = complex_of(cells)
    a, b = htc(cx, np.arange(cx.n_cells), 2), htc(cx, np.arange(cx.n_cells), 2)
    assert np.array_equal(a.cell_labels, b.cell_labels) and a.merge_log == b.merge_log


# ------------------------------------------------------------ cut hierarchy


def test_cut_hierarchy_examples():
    cx = complex_of(block((0, 0, 0), (4, 1, 1)))
    res = htc(cx, np.arange(4), 1)
    assert set(cut_hierarchy(res.tree, 1)) == {0}
    assert np.array_equal(cut_hierarchy(res.tree, 4), np.arange(4))
    root = res.tree[-1]
    kids = [res.tree[c].cell_ids for c in root.children]
    lab = cut_hierarchy(res.tree, 2)
    for k in kids:
        assert len(set(lab[k])) == 1
    assert lab[kids[0][0]] != lab[kids[1][0]]
    with pytest.raises(KOutOfRange):
        cut_hierarchy(res.tree, 5)
    with pytest.raises(KOutOfRange):
        cut_hierarchy(res.tree, 0)


# ------------------------------------------------------------ assign cells


def test_assign_cells_examples():
    cx = complex_of(block((0, 0, 0), (4, 1, 1)))
    pts = np.array([[0.0, 0.5, 0.5], [4.0, 0.5, 0.5]])
    cloud = PointCloud(pts)
    one = [Cluster(np.array([0, 1]), 0, pts[0], np.zeros(3), np.array([0, 0, 1.0]))]
    assert set(assign_cells(cx, one, cloud)) == {0}
    two = [Cluster(np.array([0]), 0, pts[0], np.zeros(3), np.array([0, 0, 1.0])),
           Cluster(np.array([1]), 1, pts[1], np.zeros(3), np.array([0, 0, 1.0]))]
    lab = assign_cells(cx, two, cloud)
    assert list(lab) == [0, 0, 1, 1]
    # midpoint tie goes to the lower id
    cx3 = cell_complex(VoxelGrid(np.array([1.5, 0, 0]), 1.0, [[0, 0, 0]]))
    assert assign_cells(cx3, two[::-1], cloud)[0] == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_assign_cells_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    cx = complex_of(block((0, 0, 0), (5, 5, 2)))
    pts = rng.random((30, 3)) * [5, 5, 2]
    lab = rng.integers(0, 3, 30)
    lab[:3] = [0, 1, 2]
    clusters = [Cluster(np.nonzero(lab == i)[0], int(np.nonzero(lab == i)[0][0]), pts[lab == i][0],
                        np.zeros(3), np.array([0, 0, 1.0])) for i in range(3)]
    got = assign_cells(cx, clusters, PointCloud(pts))
    d = np.linalg.norm(cx.centroids[:, None] - pts[None], axis=2)
    assert np.array_equal(got, lab[np.argmin(d, axis=1)])


# -------------------------------------------------------------- end to end


def test_segment_cube_single_part(cube_obj):
    res = segment_object(cube_obj.cloud, cube_obj.mesh, SegmentParams(cell_size=0.01, target_parts=1))
    pair = SegPair(res.point_labels, cube_obj.gt_labels)
    assert use_error(pair) == 0 and gce(pair) == 0


def test_segment_dumbbell(dumbbell):
    res = segment_object(dumbbell.cloud, dumbbell.mesh, SegmentParams(cell_size=0.005, target_parts=3))
    assert use_error(SegPair(res.point_labels, dumbbell.gt_labels)) <= 0.1
    assert res.n_parts == 3 and len(res.point_labels) == len(dumbbell.cloud)


def test_segment_deterministic(dumbbell):
    p = SegmentParams(cell_size=0.005, target_parts=3)
    a = segment_object(dumbbell.cloud, dumbbell.mesh, p)
    b = segment_object(dumbbell.cloud, dumbbell.mesh, p)
    assert np.array_equal(a.cell_labels, b.cell_labels) and a.merge_log == b.merge_log


def test_segment_estimates_missing_normals(cube_obj):
    cloud = PointCloud(cube_obj.cloud.positions, cube_obj.cloud.colours)
    res = segment_object(cloud, cube_obj.mesh, SegmentParams(cell_size=0.01))
    assert res.n_parts == 1
