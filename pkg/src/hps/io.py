"""File formats: OBJ meshes, ASCII PLY clouds, wrench CSV, pose and parameter JSON."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import FormatError
from .geom import PointCloud, TriMesh
from .identify import WrenchSample
from .inertia import Pose

WRENCH_HEADER = ("t", "fx", "fy", "fz", "tx", "ty", "tz", "gx", "gy", "gz",
                 "ax", "ay", "az", "alx", "aly", "alz", "wx", "wy", "wz")


# --------------------------------------------------------------------- meshes


def write_obj(path, mesh: TriMesh) -> None:
    with open(path, "w") as f:
        for v in mesh.vertices:
            f.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for a, b, c in mesh.faces + 1:
            f.write(f"f {a} {b} {c}\n")


def read_obj(path) -> TriMesh:
    """v/f subset; polygon faces are fanned, texture/normal indices ignored."""
    verts, faces = [], []
    with open(path) as f:
        for ln, line in enumerate(f, 1):
            tok = line.split()
            if not tok or tok[0].startswith("#"):
                continue
            try:
                if tok[0] == "v":
                    verts.append([float(x) for x in tok[1:4]])
                elif tok[0] == "f":
                    idx = [int(t.split("/")[0]) for t in tok[1:]]
                    idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                    faces.extend([idx[0], idx[k], idx[k + 1]] for k in range(1, len(idx) - 1))
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}:{ln}: {exc}") from exc
    if not verts or not faces:
        raise FormatError(f"{path}: no vertices or faces")
    faces = np.array(faces)
    if faces.min() < 0 or faces.max() >= len(verts):
        raise FormatError(f"{path}: face index out of range")
    return TriMesh(np.array(verts), faces)


# --------------------------------------------------------------------- clouds


def write_ply(path, cloud: PointCloud, labels=None) -> None:
    labels = cloud.labels if labels is None else np.asarray(labels)
    normals = cloud.normals if cloud.normals is not None else np.zeros((len(cloud), 3))
    props = ["float x", "float y", "float z", "uchar red", "uchar green", "uchar blue",
             "float nx", "float ny", "float nz"]
    if labels is not None:
        props.append("int label")
    with open(path, "w") as f:
        f.write("ply\nformat ascii 1.0\n")
        f.write(f"element vertex {len(cloud)}\n")
        f.writelines(f"property {p}\n" for p in props)
        f.write("end_header\n")
        for i in range(len(cloud)):
            p, c, n = cloud.positions[i], cloud.colours[i], normals[i]
            row = f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g} {c[0]} {c[1]} {c[2]} {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}"
            if labels is not None:
                row += f" {int(labels[i])}"
            f.write(row + "\n")


def read_ply(path) -> PointCloud:
    with open(path) as f:
        if f.readline().strip() != "ply":
            raise FormatError(f"{path}: not a PLY file")
        names, n = [], None
        for line in f:
            tok = line.split()
            if not tok:
                continue
            if tok[0] == "format" and tok[1] != "ascii":
                raise FormatError(f"{path}: only ASCII PLY is supported")
            if tok[0] == "element":
                if tok[1] != "vertex":
                    raise FormatError(f"{path}: unexpected element {tok[1]}")
                n = int(tok[2])
            elif tok[0] == "property":
                names.append(tok[-1])
            elif tok[0] == "end_header":
                break
        if n is None:
            raise FormatError(f"{path}: missing vertex element")
        data = np.loadtxt(f, ndmin=2, max_rows=n) if n else np.zeros((0, len(names)))
    if data.shape != (n, len(names)):
        raise FormatError(f"{path}: expected {n} rows of {len(names)} values")
    col = {k: data[:, i] for i, k in enumerate(names)}
    try:
        pos = np.stack([col["x"], col["y"], col["z"]], 1)
    except KeyError as exc:
        raise FormatError(f"{path}: missing coordinate {exc}") from exc
    rgb = np.stack([col[k] for k in ("red", "green", "blue")], 1) if "red" in col else None
    nrm = np.stack([col[k] for k in ("nx", "ny", "nz")], 1) if "nx" in col else None
    if nrm is not None and np.allclose(nrm, 0):
        nrm = None
    lab = col["label"].astype(np.int64) if "label" in col else None
    return PointCloud(pos, rgb, nrm, lab)


# ------------------------------------------------------------------- wrenches


def write_wrench_csv(path, samples) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(WRENCH_HEADER)
        for s in samples:
            vals = [s.t, *s.force, *s.torque, *s.gravity_s, *s.lin_acc, *s.ang_acc, *s.ang_vel]
            w.writerow([f"{v:.17g}" for v in vals])


def read_wrench_csv(path) -> list[WrenchSample]:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or tuple(h.strip() for h in rows[0]) != WRENCH_HEADER:
        raise FormatError(f"{path}: header must be {','.join(WRENCH_HEADER)}")
    try:
        a = np.array([[float(x) for x in r] for r in rows[1:] if r], float).reshape(-1, len(WRENCH_HEADER))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if not np.all(np.isfinite(a)):
        raise FormatError(f"{path}: non-finite values")
    return [WrenchSample(r[0], r[1:4], r[4:7], r[7:10], r[10:13], r[13:16], r[16:19]) for r in a]


# ----------------------------------------------------------------------- json


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, default=_default) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def write_poses(path, poses) -> None:
    write_json(path, [p.to_dict() for p in poses])


def read_poses(path) -> list[Pose]:
    d = read_json(path)
    if isinstance(d, dict):
        d = [d]
    try:
        return [Pose.from_dict(p) for p in d]
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"{path}: bad pose entry: {exc}") from exc
