"""Part segmentation: surface point clustering warm-starting hierarchical convexity merging.

The first stage groups cloud points by a weighted position/colour/normal
dissimilarity with a doubling threshold.  The second stage (HTC) greedily
merges volumetric cells, preferring convex unions and small clusters.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .errors import DisconnectedComplex, KOutOfRange, MissingNormals
from .geom import CellComplex, PointCloud, TriMesh, cell_complex, estimate_normals, voxelize

TOL_CONVEX_REL = 1e-6


@dataclass(frozen=True)
class ClusterWeights:
    lambda_p: float = 1.0  # 1/m
    lambda_l: float = 0.01  # per RGB unit
    lambda_n: float = 1.0

    def __post_init__(self):
        w = (self.lambda_p, self.lambda_l, self.lambda_n)
        if min(w) < 0 or max(w) == 0:
            raise ValueError("weights must be non-negative and not all zero")


# colour weighted up so part boundaries (colour jumps of ~100 RGB units)
# outrank normal changes inside a part; tuned on the built-in objects
SUITE_WEIGHTS = ClusterWeights(1.0, 0.2, 1.0)


@dataclass(frozen=True)
class Cluster:
    member_ids: np.ndarray
    rep_index: int
    rep_position: np.ndarray
    rep_colour: np.ndarray
    rep_normal: np.ndarray


@dataclass(frozen=True)
class MergeNode:
    id: int
    children: tuple
    cell_ids: np.ndarray
    cached_hull_volume: float
    cached_volume: float


@dataclass
class SegmentationResult:
    cell_labels: np.ndarray
    tree: list
    n_parts: int
    merge_log: list
    hull_eval_count: int
    point_labels: np.ndarray | None = None
    complex: CellComplex | None = field(default=None, repr=False)
    initial_labels: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = {
            "cell_labels": self.cell_labels.tolist(),
            "point_labels": None if self.point_labels is None else self.point_labels.tolist(),
            "merge_log": self.merge_log,
            "n_parts": self.n_parts,
            "hull_eval_count": self.hull_eval_count,
        }
        if self.complex is not None:
            d["cell_centroids"] = self.complex.centroids.tolist()
            d["cell_volumes"] = self.complex.volumes.tolist()
            d["cell_size"] = self.complex.cell_size
        return d


# ------------------------------------------------------------------ stage one


def _dissim(p1, l1, n1, p2, l2, n2, w: ClusterWeights):
    dp = np.linalg.norm(np.asarray(p1, float) - p2, axis=-1)
    dl = np.linalg.norm(np.asarray(l1, float) - np.asarray(l2, float), axis=-1)
    dn = 1.0 - np.abs(np.sum(np.asarray(n1, float) * n2, axis=-1))
    return w.lambda_p * dp + w.lambda_l * dl + w.lambda_n * dn


def dissimilarity(a: Cluster, b: Cluster, w: ClusterWeights) -> float:
    d = _dissim(a.rep_position, a.rep_colour, a.rep_normal, b.rep_position, b.rep_colour, b.rep_normal, w)
    return float(max(d, 0.0))


def _representatives(labels, P, L, N, w, n_clusters):
    """Per-cluster member closest (in dissimilarity) to the cluster's mean features."""
    cnt = np.bincount(labels, minlength=n_clusters).astype(float)
    mp = np.stack([np.bincount(labels, P[:, a], n_clusters) for a in range(3)], 1) / cnt[:, None]
    ml = np.stack([np.bincount(labels, L[:, a], n_clusters) for a in range(3)], 1) / cnt[:, None]
    S = np.zeros((n_clusters, 3, 3))
    for a in range(3):
        for b in range(a, 3):
            S[:, a, b] = S[:, b, a] = np.bincount(labels, N[:, a] * N[:, b], n_clusters)
    mn = np.linalg.eigh(S)[1][:, :, -1]
    d = _dissim(P, L, N, mp[labels], ml[labels], mn[labels], w)
    order = np.lexsort((np.arange(len(labels)), d, labels))
    first = np.ones(len(order), bool)
    first[1:] = labels[order][1:] != labels[order][:-1]
    reps = np.empty(n_clusters, np.int64)
    reps[labels[order][first]] = order[first]
    return reps


def _compact(labels):
    """Relabel to 0..C-1 ordered by smallest member index."""
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), np.int64)
    rank[np.argsort(first)] = np.arange(len(first))
    return rank[inv.reshape(-1)], len(first)


def default_beta0(cloud: PointCloud, w: ClusterWeights, seed: int = 0, pairs: int = 1000) -> float:
    rng = np.random.default_rng(seed)
    n = len(cloud)
    i = rng.integers(0, n, pairs)
    j = rng.integers(0, n, pairs)
    P, L, N = cloud.positions, cloud.colours, cloud.normals
    d = _dissim(P[i], L[i], N[i], P[j], L[j], N[j], w)
    med = float(np.median(d))
    return 0.1 * med if med > 0 else 1e-6


def initial_clustering(
    cloud: PointCloud,
    w: ClusterWeights = ClusterWeights(),
    desired: int = 50,
    beta0: float | None = None,
    knn: int = 8,
    seed: int = 0,
) -> list[Cluster]:
    """Bottom-up clustering of cloud points with a doubling similarity threshold.

    Adjacent clusters (linked by the k-NN graph) whose representatives are
    closer than beta are merged, most similar pairs first, until the cluster
    count reaches `desired`; beta doubles after every pass.  One border pass
    then moves each boundary point to its most similar adjacent cluster.
    """
    if cloud.normals is None:
        raise MissingNormals("initial clustering needs per-point normals")
    if desired < 1:
        raise ValueError("desired must be >= 1")
    P, L, N = cloud.positions, cloud.colours.astype(float), cloud.normals
    n = len(P)
    beta = default_beta0(cloud, w, seed) if beta0 is None else float(beta0)
    if not beta > 0:
        raise ValueError("beta0 must be positive")
    k = min(knn, n - 1)
    if k >= 1:
        _, nbr = cKDTree(P).query(P, k=k + 1)
        nbr = nbr[:, 1:]
        edges = np.sort(np.stack([np.repeat(np.arange(n), k), nbr.ravel()], 1), axis=1)
        edges = np.unique(edges[edges[:, 0] != edges[:, 1]], axis=0)
    else:
        nbr = np.zeros((n, 0), np.int64)
        edges = np.zeros((0, 2), np.int64)

    labels = np.arange(n)
    reps = np.arange(n)
    count = n
    while count > desired:
        la, lb = labels[edges[:, 0]], labels[edges[:, 1]]
        cross = la != lb
        if not cross.any():
            break
        pairs = np.unique(np.sort(np.stack([la[cross], lb[cross]], 1), axis=1), axis=0)
        ra, rb = reps[pairs[:, 0]], reps[pairs[:, 1]]
        d = _dissim(P[ra], L[ra], N[ra], P[rb], L[rb], N[rb], w)
        cand = np.nonzero(d < beta)[0]
        cand = cand[np.lexsort((pairs[cand, 1], pairs[cand, 0], d[cand]))]
        parent = np.arange(labels.max() + 1)

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e in cand:
            if count <= desired:
                break
            a, b = find(pairs[e, 0]), find(pairs[e, 1])
            if a != b:
                parent[max(a, b)] = min(a, b)
                count -= 1
        if len(cand):
            roots = np.array([find(x) for x in range(len(parent))])
            labels, c = _compact(roots[labels])
            reps = _representatives(labels, P, L, N, w, c)
        beta *= 2.0

    labels, c = _compact(labels)
    reps = _representatives(labels, P, L, N, w, c)
    # single border refinement pass
    if k >= 1 and c > 1:
        nl = labels[nbr]
        border = np.nonzero((nl != labels[:, None]).any(axis=1))[0]
        new = labels.copy()
        for i in border:
            cands = np.unique(np.concatenate([[labels[i]], nl[i]]))
            r = reps[cands]
            d = _dissim(P[i], L[i], N[i], P[r], L[r], N[r], w)
            best = cands[d == d.min()]
            new[i] = labels[i] if labels[i] in best else best.min()
        labels, c = _compact(new)
        reps = _representatives(labels, P, L, N, w, c)
    clusters = []
    for ci in range(c):
        r = int(reps[ci])
        clusters.append(Cluster(np.nonzero(labels == ci)[0], r, P[r].copy(), cloud.colours[r].copy(), N[r].copy()))
    return clusters


def cluster_labels(clusters, n_points: int) -> np.ndarray:
    lab = np.full(n_points, -1, np.int64)
    for i, c in enumerate(clusters):
        lab[c.member_ids] = i
    return lab


def assign_cells(complex: CellComplex, clusters, cloud: PointCloud) -> np.ndarray:
    """Label each cell with the cluster of the cloud point nearest its centroid.

    Equidistant points resolve to the lowest cluster id.
    """
    if not clusters:
        raise ValueError("need at least one cluster")
    lab = cluster_labels(clusters, len(cloud))
    k = min(4, len(cloud))
    d, idx = cKDTree(cloud.positions).query(complex.centroids, k=k)
    d = d.reshape(len(complex.centroids), k)
    idx = idx.reshape(len(complex.centroids), k)
    tie = d <= d[:, :1] * (1 + 1e-12) + 1e-15
    cand = np.where(tie, lab[idx], np.iinfo(np.int64).max)
    return cand.min(axis=1)


# ------------------------------------------------------------------ stage two


def htc_edge_cost(hullvol_union: float, vol_union: float, size_i: int, size_j: int,
                  n_total: int, tol_convex: float = 0.0) -> float:
    """Concavity-plus-one for concave unions, squared size share otherwise."""
    c = hullvol_union - vol_union
    if c > tol_convex:
        return c + 1.0
    return (size_i**2 + size_j**2) / n_total**2


class _HullCache:
    def __init__(self):
        self.count = 0

    def hull(self, pts):
        """(hull volume, hull vertex coordinates); volume 0 for degenerate sets."""
        self.count += 1
        try:
            h = ConvexHull(pts)
        except QhullError:
            return 0.0, pts
        return float(h.volume), pts[h.vertices]


def htc(complex: CellComplex, initial_cell_labels, target_parts: int,
        tol_convex: float | None = None) -> SegmentationResult:
    """Hierarchical convexity-driven merging of cell clusters to a single root per component.

    Nodes start as the initial clusters; edges join clusters with face-sharing
    cells.  The cheapest edge is merged each step (ties: smaller combined size,
    then lower node ids) and edges to the new node are re-costed; stale heap
    entries referring to merged nodes are skipped when popped.
    """
    if target_parts < 1:
        raise KOutOfRange("target_parts must be >= 1")
    init = np.asarray(initial_cell_labels)
    if len(init) != complex.n_cells:
        raise ValueError("initial labels must cover every cell")
    uniq, leaf_of_cell = np.unique(init, return_inverse=True)
    n_leaves = len(uniq)
    N = complex.n_cells
    corners = complex.corners
    if tol_convex is None:
        allc = corners.reshape(-1, 3)
        tol_convex = TOL_CONVEX_REL * float(np.prod(allc.max(axis=0) - allc.min(axis=0)))
    hc = _HullCache()

    order = np.argsort(leaf_of_cell, kind="stable")
    bounds = np.searchsorted(leaf_of_cell[order], np.arange(n_leaves + 1))
    tree: list[MergeNode] = []
    hull_pts: dict[int, np.ndarray] = {}
    size: dict[int, int] = {}
    vol: dict[int, float] = {}
    for i in range(n_leaves):
        cells = order[bounds[i] : bounds[i + 1]]
        pts = corners[cells].reshape(-1, 3)
        hv, hp = hc.hull(pts)
        hull_pts[i] = hp
        size[i] = len(cells)
        vol[i] = float(complex.volumes[cells].sum())
        tree.append(MergeNode(i, (), np.sort(cells), hv, vol[i]))

    nbrs: dict[int, set] = {i: set() for i in range(n_leaves)}
    if len(complex.adjacency):
        la = leaf_of_cell[complex.adjacency[:, 0]]
        lb = leaf_of_cell[complex.adjacency[:, 1]]
        m = la != lb
        for a, b in np.unique(np.sort(np.stack([la[m], lb[m]], 1), axis=1), axis=0):
            nbrs[int(a)].add(int(b))
            nbrs[int(b)].add(int(a))

    heap = []
    pending: dict[tuple, tuple] = {}

    def push(a, b):
        a, b = min(a, b), max(a, b)
        hv, hp = hc.hull(np.vstack([hull_pts[a], hull_pts[b]]))
        v = vol[a] + vol[b]
        if hv == 0.0:
            hv = v  # degenerate union treated as convex
        cost = htc_edge_cost(hv, v, size[a], size[b], N, tol_convex)
        pending[(a, b)] = (hv, hp)
        heapq.heappush(heap, (cost, size[a] + size[b], a, b))

    for a in range(n_leaves):
        for b in sorted(nbrs[a]):
            if a < b:
                push(a, b)

    alive = set(range(n_leaves))
    merge_log = []
    next_id = n_leaves
    while heap:
        cost, _, a, b = heapq.heappop(heap)
        if a not in alive or b not in alive:
            pending.pop((a, b), None)
            continue
        hv, hp = pending.pop((a, b))
        new = next_id
        next_id += 1
        alive -= {a, b}
        hull_pts[new] = hp
        size[new] = size[a] + size[b]
        vol[new] = vol[a] + vol[b]
        cells = np.sort(np.concatenate([tree[a].cell_ids, tree[b].cell_ids]))
        tree.append(MergeNode(new, (a, b), cells, hv, vol[new]))
        merge_log.append({"a": a, "b": b, "parent": new, "cost": cost, "concave": cost > 1.0})
        nb = (nbrs.pop(a) | nbrs.pop(b)) - {a, b}
        for x in nb:
            nbrs[x] -= {a, b}
            nbrs[x].add(new)
        nbrs[new] = nb
        for x in sorted(nb):
            push(new, x)
        del hull_pts[a], hull_pts[b]
        alive.add(new)

    if len(alive) > target_parts:
        raise DisconnectedComplex(f"{len(alive)} components exceed target_parts={target_parts}")
    labels = cut_hierarchy(tree, min(target_parts, n_leaves))
    return SegmentationResult(
        cell_labels=labels,
        tree=tree,
        n_parts=int(labels.max()) + 1,
        merge_log=merge_log,
        hull_eval_count=hc.count,
        complex=complex,
        initial_labels=leaf_of_cell,
    )


def cut_hierarchy(tree, k: int) -> np.ndarray:
    """Cell labels after undoing the last merges so that exactly k subtrees remain.

    Labels are numbered by the smallest cell index in each part.
    """
    leaves = [n for n in tree if not n.children]
    merges = sorted((n for n in tree if n.children), key=lambda n: n.id)
    n_roots = len(leaves) - len(merges)
    if not (max(1, n_roots) <= k <= len(leaves)):
        raise KOutOfRange(f"k={k} outside [{max(1, n_roots)}, {len(leaves)}]")
    parent = {n.id: n.id for n in leaves}
    for node in merges[: len(leaves) - k]:
        a, b = node.children
        parent[a] = parent[b] = parent[node.id] = node.id

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    n_cells = sum(len(leaf.cell_ids) for leaf in leaves)
    raw = np.empty(n_cells, np.int64)
    for leaf in leaves:
        raw[leaf.cell_ids] = find(leaf.id)
    return _compact(raw)[0]


# ------------------------------------------------------------------ pipeline


@dataclass(frozen=True)
class SegmentParams:
    weights: ClusterWeights = SUITE_WEIGHTS
    desired_clusters: int = 50
    cell_size: float | None = None
    target_parts: int = 1
    initial_clustering: bool = True
    beta0: float | None = None
    knn: int = 8
    normal_k: int = 10
    seed: int = 0


def segment_object(cloud: PointCloud, mesh: TriMesh, params: SegmentParams = SegmentParams()) -> SegmentationResult:
    """Cluster the cloud, voxelize the mesh, run HTC and label cells and points."""
    if cloud.normals is None:
        cloud = estimate_normals(cloud, params.normal_k)
    grid = voxelize(mesh, params.cell_size)
    cx = cell_complex(grid)
    if params.initial_clustering:
        clusters = initial_clustering(cloud, params.weights, params.desired_clusters,
                                      params.beta0, params.knn, params.seed)
        init = assign_cells(cx, clusters, cloud)
    else:
        init = np.arange(cx.n_cells)
    res = htc(cx, init, params.target_parts)
    _, nearest = cKDTree(cx.centroids).query(cloud.positions)
    res.point_labels = res.cell_labels[nearest]
    return res
