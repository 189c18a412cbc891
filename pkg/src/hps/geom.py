"""Core 3D geometry: hulls, voxelization, cell complexes, sampling and mesh distance.

Meshes and clouds are plain numpy containers.  Everything here is a pure
function of its inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .errors import (
    DegenerateInput,
    DegenerateMesh,
    EmptyGrid,
    NotWatertight,
    ResolutionTooCoarse,
    TooFewPoints,
)

HULL_EPS = 1e-12


def _frozen(a, dtype=float, shape=None):
    arr = np.array(a, dtype=dtype, copy=True)
    if shape is not None:
        arr = arr.reshape(shape)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TriMesh:
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = _frozen(self.vertices, float, (-1, 3))
        f = _frozen(self.faces, np.int64, (-1, 3))
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise DegenerateMesh("face index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @cached_property
    def watertight(self) -> bool:
        """Every undirected edge is used by exactly two faces, once in each direction."""
        if len(self.faces) == 0:
            return False
        f = self.faces
        directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        undirected = np.sort(directed, axis=1)
        _, counts = np.unique(undirected, axis=0, return_counts=True)
        if not np.all(counts == 2):
            return False
        # consistent winding: each directed edge appears once
        _, dcounts = np.unique(directed, axis=0, return_counts=True)
        return bool(np.all(dcounts == 1))

    @property
    def triangles(self) -> np.ndarray:
        return self.vertices[self.faces]

    @cached_property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def extents(self) -> np.ndarray:
        lo, hi = self.bounds
        return hi - lo

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.extents))

    @cached_property
    def face_areas(self) -> np.ndarray:
        t = self.triangles
        return 0.5 * np.linalg.norm(np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]), axis=1)

    @cached_property
    def face_normals(self) -> np.ndarray:
        t = self.triangles
        n = np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        return n / np.where(norm > 0, norm, 1.0)

    def transformed(self, rotation, translation=(0.0, 0.0, 0.0), scale=1.0) -> "TriMesh":
        R = np.asarray(rotation, float)
        v = scale * (self.vertices @ R.T) + np.asarray(translation, float)
        return TriMesh(v, self.faces)

    @staticmethod
    def concatenate(meshes) -> "TriMesh":
        verts, faces, off = [], [], 0
        for m in meshes:
            verts.append(m.vertices)
            faces.append(m.faces + off)
            off += len(m.vertices)
        return TriMesh(np.concatenate(verts), np.concatenate(faces))


@dataclass(frozen=True)
class PointCloud:
    positions: np.ndarray
    colours: np.ndarray | None = None
    normals: np.ndarray | None = None
    labels: np.ndarray | None = None

    def __post_init__(self):
        p = _frozen(self.positions, float, (-1, 3))
        n = len(p)
        object.__setattr__(self, "positions", p)
        if self.colours is None:
            c = np.full((n, 3), 128, dtype=np.int64)
        else:
            c = np.asarray(self.colours)
            c = np.clip(np.rint(c), 0, 255).astype(np.int64).reshape(-1, 3)
        object.__setattr__(self, "colours", _frozen(c, np.int64))
        if self.normals is not None:
            nm = _frozen(self.normals, float, (-1, 3))
            if len(nm) != n:
                raise ValueError("normals length mismatch")
            object.__setattr__(self, "normals", nm)
        if self.labels is not None:
            lb = _frozen(self.labels, np.int64, (-1,))
            if len(lb) != n:
                raise ValueError("labels length mismatch")
            object.__setattr__(self, "labels", lb)
        if len(self.colours) != n:
            raise ValueError("colours length mismatch")

    def __len__(self):
        return len(self.positions)

    def with_labels(self, labels) -> "PointCloud":
        return PointCloud(self.positions, self.colours, self.normals, labels)

    def with_normals(self, normals) -> "PointCloud":
        return PointCloud(self.positions, self.colours, normals, self.labels)


@dataclass(frozen=True)
class VoxelGrid:
    origin: np.ndarray
    cell_size: float
    occupied: np.ndarray  # (k, 3) int indices, lexicographically sorted
    shape: tuple[int, int, int] = field(default=(0, 0, 0))

    def __post_init__(self):
        if not self.cell_size > 0:
            raise ValueError("cell_size must be positive")
        object.__setattr__(self, "origin", _frozen(self.origin, float, (3,)))
        occ = np.asarray(self.occupied, dtype=np.int64).reshape(-1, 3)
        if len(occ):
            occ = np.unique(occ, axis=0)
        object.__setattr__(self, "occupied", _frozen(occ, np.int64))
        if self.shape == (0, 0, 0) and len(occ):
            object.__setattr__(self, "shape", tuple(int(s) for s in occ.max(axis=0) + 1))

    @property
    def centres(self) -> np.ndarray:
        return self.origin + (self.occupied + 0.5) * self.cell_size

    @property
    def volume(self) -> float:
        return len(self.occupied) * self.cell_size**3


_CORNER_OFFSETS = np.array(
    [[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)], dtype=float
)


@dataclass(frozen=True)
class CellComplex:
    centroids: np.ndarray
    volumes: np.ndarray
    adjacency: np.ndarray  # (E, 2), i < j, sorted
    cell_size: float

    @property
    def n_cells(self) -> int:
        return len(self.centroids)

    @cached_property
    def corners(self) -> np.ndarray:
        """(n, 8, 3) cube corner positions."""
        lo = self.centroids - 0.5 * self.cell_size
        return lo[:, None, :] + self.cell_size * _CORNER_OFFSETS[None, :, :]

    @cached_property
    def neighbours(self) -> list[np.ndarray]:
        out = [[] for _ in range(self.n_cells)]
        for i, j in self.adjacency:
            out[i].append(j)
            out[j].append(i)
        return [np.array(sorted(x), dtype=np.int64) for x in out]


# --------------------------------------------------------------------------- hulls


def convex_hull(points) -> TriMesh:
    """Convex hull as an outward-wound triangle mesh over the hull vertices only.

    Raises DegenerateInput for fewer than 4 points or (near) coplanar input.
    """
    P = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(P) < 4:
        raise DegenerateInput(f"need at least 4 points, got {len(P)}")
    diag = float(np.linalg.norm(P.max(axis=0) - P.min(axis=0)))
    if diag == 0.0:
        raise DegenerateInput("all points coincide")
    sv = np.linalg.svd(P - P.mean(axis=0), compute_uv=False)
    if sv[-1] <= HULL_EPS * diag * np.sqrt(len(P)):
        raise DegenerateInput("points are coplanar or collinear")
    try:
        hull = ConvexHull(P)
    except QhullError as exc:
        raise DegenerateInput(str(exc)) from exc
    used = np.unique(hull.simplices)
    remap = np.full(len(P), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    faces = remap[hull.simplices]
    verts = P[used]
    tri = verts[faces]
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    flip = np.einsum("ij,ij->i", n, hull.equations[:, :3]) < 0
    faces[flip] = faces[flip][:, ::-1]
    return TriMesh(verts, faces)


def hull_volume_of_points(points) -> float:
    """Volume of the convex hull of a point set; 0 for degenerate input."""
    P = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(P) < 4:
        return 0.0
    try:
        return float(ConvexHull(P).volume)
    except QhullError:
        return 0.0


def hull_volume(mesh: TriMesh) -> float:
    """Enclosed volume of a closed, consistently wound mesh (divergence theorem)."""
    if not mesh.watertight:
        raise NotWatertight("volume requires a closed, consistently oriented mesh")
    t = mesh.triangles
    return float(abs(np.einsum("ij,ij->i", t[:, 0], np.cross(t[:, 1], t[:, 2])).sum()) / 6.0)


def points_in_convex_mesh(mesh: TriMesh, points, tol=0.0) -> np.ndarray:
    """Half-space containment test against every face plane of a convex mesh."""
    P = np.asarray(points, float).reshape(-1, 3)
    t = mesh.triangles
    n = mesh.face_normals
    d = np.einsum("ij,ij->i", n, t[:, 0])
    return np.all(P @ n.T - d[None, :] <= tol, axis=1)


# ------------------------------------------------------------------ voxelization


def _ray_parity_inside(tris, origin, cs, shape) -> np.ndarray:
    """Cell-centre inside test by +x ray parity per (y, z) column.

    The query column is nudged by an irrational sub-cell offset so rays never
    graze shared triangle edges of the tessellation.
    """
    nx, ny, nz = shape
    cx = origin[0] + (np.arange(nx) + 0.5) * cs
    cy = origin[1] + (np.arange(ny) + 0.5) * cs + cs * 1.2345678e-6
    cz = origin[2] + (np.arange(nz) + 0.5) * cs + cs * 2.7182818e-6
    parity = np.zeros(shape, dtype=bool)
    for a, b, c in tris:
        # project to yz
        det = (b[1] - a[1]) * (c[2] - a[2]) - (c[1] - a[1]) * (b[2] - a[2])
        if abs(det) < 1e-300:
            continue
        ymin, ymax = min(a[1], b[1], c[1]), max(a[1], b[1], c[1])
        zmin, zmax = min(a[2], b[2], c[2]), max(a[2], b[2], c[2])
        j0 = max(int(np.searchsorted(cy, ymin)), 0)
        j1 = int(np.searchsorted(cy, ymax, side="right"))
        k0 = max(int(np.searchsorted(cz, zmin)), 0)
        k1 = int(np.searchsorted(cz, zmax, side="right"))
        if j0 >= j1 or k0 >= k1:
            continue
        Y, Z = np.meshgrid(cy[j0:j1], cz[k0:k1], indexing="ij")
        dy, dz = Y - a[1], Z - a[2]
        l1 = (dy * (c[2] - a[2]) - (c[1] - a[1]) * dz) / det
        l2 = ((b[1] - a[1]) * dz - dy * (b[2] - a[2])) / det
        hit = (l1 >= 0) & (l2 >= 0) & (l1 + l2 <= 1)
        if not hit.any():
            continue
        jj, kk = np.nonzero(hit)
        xh = a[0] + l1[hit] * (b[0] - a[0]) + l2[hit] * (c[0] - a[0])
        parity[:, jj + j0, kk + k0] ^= cx[:, None] < xh[None, :]
    return parity


def _tri_box_overlap(tri, centres, h) -> np.ndarray:
    """Separating-axis triangle/axis-aligned-cube test, vectorized over cube centres."""
    u = tri[None, :, :] - centres[:, None, :]  # (m, 3 verts, 3)
    if np.any(u.min(axis=1) > h, axis=1).all():
        return np.zeros(len(centres), bool)
    sep = np.any(u.min(axis=1) > h, axis=1) | np.any(u.max(axis=1) < -h, axis=1)
    e = np.array([tri[1] - tri[0], tri[2] - tri[1], tri[0] - tri[2]])
    n = np.cross(e[0], e[1])
    d = u[:, 0, :] @ n
    sep |= np.abs(d) > h * np.abs(n).sum()
    eye = np.eye(3)
    for i in range(3):
        for j in range(3):
            ax = np.cross(eye[i], e[j])
            if not ax.any():
                continue
            p = u @ ax
            r = h * np.abs(ax).sum()
            sep |= (p.min(axis=1) > r) | (p.max(axis=1) < -r)
    return ~sep


def _surface_cells(tris, origin, cs, shape) -> np.ndarray:
    surf = np.zeros(shape, dtype=bool)
    h = 0.5 * cs * (1.0 - 1e-6)  # touching only is not intersecting
    dims = np.array(shape)
    for tri in tris:
        lo = np.floor((tri.min(axis=0) - origin) / cs).astype(int)
        hi = np.floor((tri.max(axis=0) - origin) / cs).astype(int)
        lo = np.clip(lo, 0, dims - 1)
        hi = np.clip(hi, 0, dims - 1)
        rng = [np.arange(lo[a], hi[a] + 1) for a in range(3)]
        idx = np.stack(np.meshgrid(*rng, indexing="ij"), axis=-1).reshape(-1, 3)
        centres = origin + (idx + 0.5) * cs
        hit = _tri_box_overlap(tri, centres, h)
        if hit.any():
            sel = idx[hit]
            surf[sel[:, 0], sel[:, 1], sel[:, 2]] = True
    return surf


def default_cell_size(mesh: TriMesh) -> float:
    return float(mesh.extents.max()) / 64.0


def voxelize(mesh: TriMesh, cell_size: float | None = None) -> VoxelGrid:
    """Occupancy grid of a closed mesh with thickening of thin features.

    A cell is occupied if its centre lies inside the mesh.  Cells that
    intersect the surface but have no inside-centre cell among their 26
    neighbours are added too, so parts thinner than a cell keep a full layer
    of cells without inflating thick parts by a surface shell.  Where that
    still leaves a connected piece of the surface-or-inside set split into
    several face-connected components, the piece keeps every surface cell.
    The grid is centred on the mesh bounding box.
    """
    if not mesh.watertight:
        raise NotWatertight("voxelize requires a closed mesh")
    if cell_size is None:
        cell_size = default_cell_size(mesh)
    cs = float(cell_size)
    lo, hi = mesh.bounds
    ext = hi - lo
    if not (cs > 0 and cs <= ext.max() * (1 + 1e-12)):
        raise ResolutionTooCoarse(f"cell_size {cs} outside (0, {ext.max()}]")
    dims = np.maximum(np.ceil(ext / cs - 1e-9).astype(int), 1)
    origin = 0.5 * (lo + hi) - 0.5 * dims * cs
    shape = tuple(int(d) for d in dims)
    tris = mesh.triangles
    inside = _ray_parity_inside(tris, origin, cs, shape)
    surf = _surface_cells(tris, origin, cs, shape)
    near_inside = ndimage.binary_dilation(inside, structure=np.ones((3, 3, 3), bool))
    occ = inside | (surf & ~near_inside)
    full = inside | surf
    face = ndimage.generate_binary_structure(3, 1)
    full_lab, n_full = ndimage.label(full, face)
    occ_lab, _ = ndimage.label(occ, face)
    for k in range(1, n_full + 1):
        piece = full_lab == k
        if len(np.unique(occ_lab[piece & occ])) > 1:
            occ |= piece
    idx = np.argwhere(occ)
    if len(idx) < 8:
        raise ResolutionTooCoarse(f"only {len(idx)} occupied cells at cell_size {cs}")
    return VoxelGrid(origin, cs, idx, shape)


def cell_complex(grid: VoxelGrid) -> CellComplex:
    """One cell per occupied voxel; adjacency over face-sharing pairs."""
    occ = grid.occupied
    if len(occ) == 0:
        raise EmptyGrid("grid has no occupied cells")
    shape = np.array(grid.shape) + 1
    lookup = np.full(tuple(shape), -1, dtype=np.int64)
    lookup[occ[:, 0], occ[:, 1], occ[:, 2]] = np.arange(len(occ))
    edges = []
    for axis in range(3):
        nb = occ.copy()
        nb[:, axis] += 1
        j = lookup[nb[:, 0], nb[:, 1], nb[:, 2]]
        ok = j >= 0
        edges.append(np.stack([np.nonzero(ok)[0], j[ok]], axis=1))
    adj = np.concatenate(edges) if edges else np.zeros((0, 2), np.int64)
    adj = np.sort(adj, axis=1)
    adj = adj[np.lexsort((adj[:, 1], adj[:, 0]))]
    vol = np.full(len(occ), grid.cell_size**3)
    return CellComplex(
        _frozen(grid.centres), _frozen(vol), _frozen(adj, np.int64), float(grid.cell_size)
    )


# --------------------------------------------------------------------- sampling


def sample_surface(mesh: TriMesh, n: int, seed: int = 0, colour=(128, 128, 128)) -> PointCloud:
    """Area-uniform surface samples with face normals.

    Per-triangle counts are stratified (floor of the expected count, remainder
    drawn by fractional weight) so face populations track area closely.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    areas = mesh.face_areas
    total = areas.sum()
    if not total > 0:
        raise DegenerateMesh("mesh has zero surface area")
    rng = np.random.default_rng(seed)
    expected = n * areas / total
    counts = np.floor(expected).astype(np.int64)
    rem = int(n - counts.sum())
    if rem > 0:
        frac = expected - counts
        pick = rng.choice(len(areas), size=rem, replace=False, p=frac / frac.sum())
        counts[pick] += 1
    fidx = np.repeat(np.arange(len(areas)), counts)
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    t = mesh.triangles[fidx]
    pts = (1 - r1)[:, None] * t[:, 0] + (r1 * (1 - r2))[:, None] * t[:, 1] + (r1 * r2)[:, None] * t[:, 2]
    cols = np.tile(np.asarray(colour, dtype=np.int64), (n, 1))
    return PointCloud(pts, cols, mesh.face_normals[fidx])


def estimate_normals(cloud: PointCloud, k: int = 10) -> PointCloud:
    """k-NN plane-fit normals oriented away from the cloud centroid."""
    P = cloud.positions
    if k < 3 or len(P) < k:
        raise TooFewPoints(f"need k >= 3 and at least k points (k={k}, n={len(P)})")
    _, nbr = cKDTree(P).query(P, k=k)
    Q = P[nbr] - P[nbr].mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", Q, Q)
    _, vecs = np.linalg.eigh(cov)
    nrm = vecs[:, :, 0]
    out = np.einsum("ij,ij->i", nrm, P - P.mean(axis=0))
    nrm[out < 0] *= -1
    return cloud.with_normals(nrm / np.linalg.norm(nrm, axis=1, keepdims=True))


# -------------------------------------------------------------------- distances


def point_mesh_distance(points, mesh: TriMesh, chunk: int = 2048) -> np.ndarray:
    """Exact unsigned distance from each point to the nearest triangle."""
    P = np.asarray(points, float).reshape(-1, 3)
    t = mesh.triangles
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    n = mesh.face_normals
    out = np.empty(len(P))
    edges = [(a, b), (b, c), (c, a)]
    for s in range(0, len(P), chunk):
        p = P[s : s + chunk, None, :]  # (m, 1, 3)
        dplane = np.einsum("mfi,fi->mf", p - a, n)
        q = p - dplane[..., None] * n
        inside = np.ones(dplane.shape, bool)
        for u, v in edges:
            cr = np.cross(v - u, q - u)
            inside &= np.einsum("mfi,fi->mf", cr, n) >= 0
        best = np.where(inside, np.abs(dplane), np.inf)
        for u, v in edges:
            e = v - u
            ee = np.einsum("fi,fi->f", e, e)
            tt = np.clip(np.einsum("mfi,fi->mf", p - u, e) / np.where(ee > 0, ee, 1), 0, 1)
            d = np.linalg.norm(p - (u + tt[..., None] * e), axis=-1)
            best = np.minimum(best, d)
        out[s : s + chunk] = best.min(axis=1)
    return out


def hausdorff_normalized(a: TriMesh, b: TriMesh, samples: int = 10_000, seed: int = 0) -> float:
    """Symmetric Hausdorff estimate after scaling each mesh to unit bbox diagonal.

    Scaling is about the world origin, so uniform scale is removed but
    translation is not.  Surface samples are measured against the other mesh's
    exact triangles.
    """
    da, db = a.diagonal, b.diagonal
    if da == 0 or db == 0:
        raise DegenerateMesh("zero-extent bounding box")
    A = TriMesh(a.vertices / da, a.faces)
    B = TriMesh(b.vertices / db, b.faces)
    pa = sample_surface(A, samples, seed).positions
    pb = sample_surface(B, samples, seed).positions
    return float(max(point_mesh_distance(pa, B).max(), point_mesh_distance(pb, A).max()))


# ------------------------------------------------------------------- primitives


def box_mesh(extents=(1.0, 1.0, 1.0), centre=(0.0, 0.0, 0.0)) -> TriMesh:
    e = 0.5 * np.asarray(extents, float)
    v = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], float) * e
    v += np.asarray(centre, float)
    # vertex index = 4*ix + 2*iy + iz
    f = [
        (0, 1, 3), (0, 3, 2),  # -x
        (4, 6, 7), (4, 7, 5),  # +x
        (0, 4, 5), (0, 5, 1),  # -y
        (2, 3, 7), (2, 7, 6),  # +y
        (0, 2, 6), (0, 6, 4),  # -z
        (1, 5, 7), (1, 7, 3),  # +z
    ]
    return TriMesh(v, f)


def cylinder_mesh(radius: float, height: float, segments: int = 48) -> TriMesh:
    """Closed cylinder along z, centred at the origin."""
    ang = 2 * np.pi * np.arange(segments) / segments
    ring = np.stack([radius * np.cos(ang), radius * np.sin(ang)], axis=1)
    h = 0.5 * height
    bottom = np.column_stack([ring, np.full(segments, -h)])
    top = np.column_stack([ring, np.full(segments, h)])
    v = np.vstack([bottom, top, [[0, 0, -h], [0, 0, h]]])
    cb, ct = 2 * segments, 2 * segments + 1
    faces = []
    for i in range(segments):
        j = (i + 1) % segments
        faces += [(i, j, segments + j), (i, segments + j, segments + i)]
        faces.append((cb, j, i))
        faces.append((ct, segments + i, segments + j))
    return TriMesh(v, faces)


def sphere_mesh(radius: float = 1.0, subdivisions: int = 3) -> TriMesh:
    """Icosphere centred at the origin."""
    t = (1 + 5**0.5) / 2
    v = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
         (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    f = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
         (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
         (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(p, float) / np.linalg.norm(p) for p in v]
    faces = f
    for _ in range(subdivisions):
        cache = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        nf = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nf += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = nf
    return TriMesh(radius * np.array(verts), faces)
