"""Mass identification of homogeneous parts from quasi-static wrenches, plus the OLS baseline."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NoStalledSamples, ShapeMismatch, TooManyParts, ZeroColumn
from .inertia import InertialParams, Pose, compose, is_consistent, part_params_sensor, skew

RANK_RTOL = 1e-8
MAX_STOP_AND_GO_PARTS = 4


@dataclass(frozen=True)
class WrenchSample:
    t: float
    force: np.ndarray
    torque: np.ndarray
    gravity_s: np.ndarray
    lin_acc: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ang_acc: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ang_vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    part_centroids_s: tuple = ()
    dwell: bool = False  # generator ground truth, not used by the identifiers


def sample_arrays(samples: Sequence[WrenchSample]) -> dict[str, np.ndarray]:
    keys = ("force", "torque", "gravity_s", "lin_acc", "ang_acc", "ang_vel")
    out = {k: np.array([getattr(s, k) for s in samples], float).reshape(-1, 3) for k in keys}
    out["t"] = np.array([s.t for s in samples], float)
    return out


@dataclass(frozen=True)
class Regressor:
    A: np.ndarray
    b: np.ndarray

    @property
    def row_block_count(self) -> int:
        return len(self.b) // 6


@dataclass(frozen=True)
class NNLSResult:
    x: np.ndarray
    status: str
    iterations: int


@dataclass(frozen=True)
class IdentResult:
    masses: np.ndarray
    params: InertialParams
    residual: float
    cond: float
    consistent: bool
    solver_status: str
    rank: int
    n_samples: int

    def to_dict(self) -> dict:
        return {
            "masses": np.asarray(self.masses).tolist(),
            "params": self.params.to_dict(),
            "residual": self.residual,
            "cond": self.cond,
            "consistent": self.consistent,
            "solver_status": self.solver_status,
            "rank": self.rank,
            "n_samples": self.n_samples,
        }


def detect_stall(samples, threshold: float = 1.0, ang_threshold: float | None = None) -> list[int]:
    """Indices whose linear and angular acceleration norms are both below threshold."""
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    ang_threshold = threshold if ang_threshold is None else ang_threshold
    if len(samples) == 0:
        return []
    arr = sample_arrays(samples)
    ok = (np.linalg.norm(arr["lin_acc"], axis=1) < threshold) & (
        np.linalg.norm(arr["ang_acc"], axis=1) < ang_threshold
    )
    return np.nonzero(ok)[0].tolist()


def build_block(gravity_s, centroids) -> np.ndarray:
    """6 x P block mapping part masses to the static wrench at one pose."""
    g = np.asarray(gravity_s, float)
    C = np.asarray(centroids, float).reshape(-1, 3)
    if not 1 <= len(C) <= MAX_STOP_AND_GO_PARTS:
        raise TooManyParts(f"stop-and-go blocks take 1..4 parts, got {len(C)}")
    top = np.repeat(g[:, None], len(C), axis=1)
    bottom = -skew(g) @ C.T
    return np.vstack([top, bottom])


def stack(blocks, wrenches) -> Regressor:
    blocks = list(blocks)
    wrenches = list(wrenches)
    if len(blocks) != len(wrenches) or not blocks:
        raise ShapeMismatch(f"{len(blocks)} blocks vs {len(wrenches)} wrenches")
    A = np.vstack(blocks)
    b = np.concatenate([np.asarray(w, float).reshape(6) for w in wrenches])
    if A.shape[0] != len(b) or not np.all(np.isfinite(A)):
        raise ShapeMismatch("regressor rows do not match wrench vector")
    return Regressor(A, b)


def nnls(A, b, max_iter: int | None = None) -> NNLSResult:
    """Lawson-Hanson active-set solver for min ||Ax - b|| s.t. x >= 0."""
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    m, n = A.shape
    max_iter = 3 * n + 10 if max_iter is None else max_iter
    x = np.zeros(n)
    passive = np.zeros(n, bool)
    tol = 10 * np.finfo(float).eps * np.abs(A).sum(axis=0).max(initial=0.0) * max(m, n)
    w = A.T @ (b - A @ x)
    it = 0
    status = "ok"
    while (~passive).any() and w[~passive].max() > tol:
        if it >= max_iter:
            status = "max_iterations"
            break
        it += 1
        cand = np.where(passive, -np.inf, w)
        passive[int(np.argmax(cand))] = True
        while True:
            s = np.zeros(n)
            s[passive] = np.linalg.lstsq(A[:, passive], b, rcond=None)[0]
            if s[passive].min() > 0:
                break
            neg = passive & (s <= 0)
            denom = x[neg] - s[neg]
            alpha = np.min(np.where(denom > 0, x[neg] / np.where(denom > 0, denom, 1.0), 0.0))
            x = x + alpha * (s - x)
            passive &= x > tol
            x[~passive] = 0.0
            if not passive.any():
                s = np.zeros(n)
                break
        x = s
        w = A.T @ (b - A @ x)
    return NNLSResult(x, status, it)


def kkt_residuals(A, b, x) -> dict[str, float]:
    """Relative KKT violations of a nonnegative least-squares solution."""
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    x = np.asarray(x, float)
    grad = A.T @ (A @ x - b)
    scale = max(np.linalg.norm(A.T @ b), np.finfo(float).tiny)
    return {
        "primal": float(max(0.0, -x.min())),
        "dual": float(max(0.0, -grad.min()) / scale),
        "slackness": float(np.abs(x * grad).max() / (scale * max(np.abs(x).max(), 1.0))),
    }


def numerical_rank(A, rtol: float = RANK_RTOL) -> int:
    s = np.linalg.svd(np.asarray(A, float), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int((s > rtol * s[0]).sum())


def condition_number(A) -> float:
    """Singular-value ratio of A after scaling each column to unit norm."""
    A = np.asarray(A, float)
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0):
        raise ZeroColumn(f"zero columns at {np.nonzero(norms == 0)[0].tolist()}")
    s = np.linalg.svd(A / norms, compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else float("inf")


def _per_sample_poses(poses, n) -> list[Pose]:
    if isinstance(poses, Pose):
        return [poses] * n
    poses = list(poses)
    if len(poses) == 1:
        return poses * n
    if len(poses) != n:
        raise ShapeMismatch(f"{len(poses)} poses for {n} samples")
    return poses


def identify_hps(
    samples,
    parts,
    poses,
    cell_volumes=None,
    threshold: float = 1.0,
    ang_threshold: float | None = None,
) -> IdentResult:
    """Identify part masses from stalled samples and assemble full parameters.

    `parts` holds object-frame point sets (cell centroids), one per part;
    `poses` gives the object-to-sensor pose per sample (or one shared pose).
    Optional `cell_volumes` (one array per part) weight the point masses.
    """
    parts = [np.asarray(p, float).reshape(-1, 3) for p in parts]
    if len(parts) > MAX_STOP_AND_GO_PARTS:
        raise TooManyParts(f"{len(parts)} parts; cut the hierarchy to at most 4")
    poses = _per_sample_poses(poses, len(samples))
    idx = detect_stall(samples, threshold, ang_threshold)
    if not idx:
        raise NoStalledSamples("no sample satisfies the stall thresholds")
    weights = list(cell_volumes) if cell_volumes is not None else [None] * len(parts)
    cents_b = []
    for P, w in zip(parts, weights):
        if w is None:
            cents_b.append(P.mean(axis=0))
        else:
            w = np.asarray(w, float)
            cents_b.append(w @ P / w.sum())
    cents_b = np.array(cents_b)
    blocks, wrenches = [], []
    for k in idx:
        s, pose = samples[k], poses[k]
        blocks.append(build_block(s.gravity_s, pose.apply(cents_b)))
        wrenches.append(np.concatenate([s.force, s.torque]))
    reg = stack(blocks, wrenches)
    sol = nnls(reg.A, reg.b)
    masses = sol.x
    rank = numerical_rank(reg.A)
    status = sol.status
    if rank < len(parts):
        status += f";rank_deficient({rank})"
    pose0 = poses[idx[0]]
    if masses.sum() > 0:
        params = compose(part_params_sensor(P, m, pose0, w) for P, m, w in zip(parts, masses, weights))
    else:
        params = InertialParams(0.0, np.zeros(3), np.zeros(6))
    try:
        cond = condition_number(reg.A)
    except ZeroColumn:
        cond = float("nan")
    return IdentResult(
        masses=masses,
        params=params,
        residual=float(np.linalg.norm(reg.A @ masses - reg.b)),
        cond=cond,
        consistent=is_consistent(params),
        solver_status=status,
        rank=rank,
        n_samples=len(idx),
    )


def _inertia_map(v: np.ndarray) -> np.ndarray:
    """(K,3) vectors -> (K,3,6) maps with I @ v == L(v) @ vech(I)."""
    K = len(v)
    L = np.zeros((K, 3, 6))
    x, y, z = v[:, 0], v[:, 1], v[:, 2]
    L[:, 0, 0], L[:, 0, 1], L[:, 0, 2] = x, y, z
    L[:, 1, 1], L[:, 1, 3], L[:, 1, 4] = x, y, z
    L[:, 2, 2], L[:, 2, 4], L[:, 2, 5] = x, y, z
    return L


def _skew_batch(v: np.ndarray) -> np.ndarray:
    S = np.zeros((len(v), 3, 3))
    S[:, 0, 1], S[:, 0, 2] = -v[:, 2], v[:, 1]
    S[:, 1, 0], S[:, 1, 2] = v[:, 2], -v[:, 0]
    S[:, 2, 0], S[:, 2, 1] = -v[:, 1], v[:, 0]
    return S


def dynamic_regressor(samples) -> Regressor:
    """Full Newton-Euler regressor for phi = (m, m c, vech(I)) about the sensor origin.

    The measured wrench is the load acting on the sensor:
    f = m (g - a) - alpha x h - w x (w x h),
    tau = h x (g - a) - I alpha - w x (I w).
    """
    arr = sample_arrays(samples)
    ga = arr["gravity_s"] - arr["lin_acc"]
    al, w = arr["ang_acc"], arr["ang_vel"]
    K = len(ga)
    Sw = _skew_batch(w)
    Y = np.zeros((K, 6, 10))
    Y[:, 0:3, 0] = ga
    Y[:, 0:3, 1:4] = -_skew_batch(al) - Sw @ Sw
    Y[:, 3:6, 1:4] = -_skew_batch(ga)
    Y[:, 3:6, 4:10] = -_inertia_map(al) - Sw @ _inertia_map(w)
    b = np.concatenate([arr["force"], arr["torque"]], axis=1).reshape(-1)
    return Regressor(Y.reshape(-1, 10), b)


def identify_ols(samples) -> IdentResult:
    """Unconstrained least squares over all ten parameters using every sample."""
    if len(samples) < 2:
        raise ShapeMismatch("OLS needs at least two samples")
    reg = dynamic_regressor(samples)
    phi, _, rank, _ = np.linalg.lstsq(reg.A, reg.b, rcond=RANK_RTOL)
    status = "ok" if rank == 10 else f"rank_deficient({rank})"
    params = InertialParams.from_phi(phi)
    try:
        cond = condition_number(reg.A)
    except ZeroColumn:
        cond = float("nan")
    return IdentResult(
        masses=np.array([phi[0]]),
        params=params,
        residual=float(np.linalg.norm(reg.A @ phi - reg.b)),
        cond=cond,
        consistent=is_consistent(params),
        solver_status=status,
        rank=int(rank),
        n_samples=len(samples),
    )
