"""Segmentation and identification quality measures."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .errors import NotSPD, ShapeMismatch
from .inertia import VECH_INDEX, InertialParams, pseudoinertia


@dataclass(frozen=True)
class SegPair:
    predicted: np.ndarray
    truth: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.predicted).reshape(-1)
        t = np.asarray(self.truth).reshape(-1)
        if len(p) != len(t) or len(p) == 0:
            raise ShapeMismatch(f"label lists of length {len(p)} and {len(t)}")
        object.__setattr__(self, "predicted", p)
        object.__setattr__(self, "truth", t)


def _contingency(a, b) -> np.ndarray:
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    C = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(C, (ia, ib), 1)
    return C


def use_error(pair: SegPair) -> float:
    """Fraction of points lying outside the plurality truth region of their predicted segment."""
    C = _contingency(pair.predicted, pair.truth)
    # argmax picks the lowest truth label on ties; the count is the same either way
    return float((C.sum() - C.max(axis=1).sum()) / C.sum())


def gce(pair: SegPair) -> float:
    """Global consistency error: the smaller of the two directional refinement sums, over n."""
    C = _contingency(pair.predicted, pair.truth).astype(float)
    n = C.sum()
    rp = C.sum(axis=1, keepdims=True)  # predicted region sizes
    rt = C.sum(axis=0, keepdims=True)
    # a point in cell (i, j) has |R_pred \ R_truth| = rp_i - C_ij
    e_pt = (C * (rp - C) / rp).sum()
    e_tp = (C * (rt - C) / rt).sum()
    return float(min(e_pt, e_tp) / n)


def riemannian_error(est: InertialParams, gt: InertialParams) -> float:
    """Affine-invariant distance between the two pseudoinertia matrices."""
    Pe, Pg = pseudoinertia(est), pseudoinertia(gt)
    for name, P in (("estimate", Pe), ("ground truth", Pg)):
        if np.linalg.eigvalsh(P).min() <= 0:
            raise NotSPD(f"{name} pseudoinertia is not positive definite")
    lam = eigh(Pe, Pg, eigvals_only=True)
    return float(np.sqrt(0.5 * np.sum(np.log(lam) ** 2)))


def inertia_normalizers(extents, mass: float) -> np.ndarray:
    """Per-vech scale m * e_a * e_b.

    Diagonal entries use the two axes other than their own (the ones the
    moment integrates over); off-diagonal entries use their own pair.
    """
    e = np.asarray(extents, float)
    out = np.empty(6)
    for k, (i, j) in enumerate(VECH_INDEX):
        a, b = ((x for x in range(3) if x != i)) if i == j else (i, j)
        out[k] = mass * e[a] * e[b]
    return out


def size_errors(est: InertialParams, gt: InertialParams, bbox_extents, gt_mass: float | None = None) -> dict:
    """Percentage errors of mass, centre of mass and inertia scaled by the object size."""
    gt_mass = gt.mass if gt_mass is None else gt_mass
    ext = np.asarray(bbox_extents, float)
    if not gt_mass > 0:
        raise ValueError("ground-truth mass must be positive")
    if ext.shape != (3,) or np.any(ext <= 0):
        raise ValueError("bounding-box extents must be three positive lengths")
    e_m = 100.0 * abs(est.mass - gt.mass) / gt_mass
    e_C = 100.0 * np.abs(est.com - gt.com) / ext
    e_J = 100.0 * np.abs(est.inertia_vech - gt.inertia_vech) / inertia_normalizers(ext, gt_mass)
    return {"e_m": float(e_m), "e_C": e_C, "e_J": e_J, "e_C_mean": float(e_C.mean()), "e_J_mean": float(e_J.mean())}
