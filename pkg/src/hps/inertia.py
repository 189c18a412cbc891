"""Point-mass inertial parameters, frame transforms, composition and consistency."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyPart, FrameMismatch, ZeroTotalMass

# row-major upper triangle: Ixx, Ixy, Ixz, Iyy, Iyz, Izz
VECH_INDEX = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
CONSISTENCY_TOL = 1e-10


def skew(u) -> np.ndarray:
    x, y, z = np.asarray(u, float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vech(M) -> np.ndarray:
    M = np.asarray(M, float)
    return np.array([M[i, j] for i, j in VECH_INDEX])


def unvech(v) -> np.ndarray:
    v = np.asarray(v, float)
    M = np.empty((3, 3))
    for k, (i, j) in enumerate(VECH_INDEX):
        M[i, j] = M[j, i] = v[k]
    return M


@dataclass(frozen=True)
class Pose:
    """Rigid transform taking coordinates of a child frame into a parent frame."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, float).reshape(3, 3)
        p = np.array(self.translation, float).reshape(3)
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9) or np.linalg.det(R) < 0:
            raise ValueError("rotation must be proper orthonormal")
        R.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", p)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points) -> np.ndarray:
        return np.asarray(points, float) @ self.rotation.T + self.translation

    def __matmul__(self, other: "Pose") -> "Pose":
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def inverse(self) -> "Pose":
        return Pose(self.rotation.T, -self.rotation.T @ self.translation)

    def to_dict(self) -> dict:
        return {"R": self.rotation.ravel().tolist(), "p": self.translation.tolist()}

    @classmethod
    def from_dict(cls, d) -> "Pose":
        return cls(np.reshape(d["R"], (3, 3)), d["p"])


@dataclass(frozen=True)
class InertialParams:
    """Mass, centre of mass and inertia about the frame origin."""

    mass: float
    com: np.ndarray
    inertia_vech: np.ndarray
    frame: str = "sensor"

    def __post_init__(self):
        c = np.array(self.com, float).reshape(3)
        v = np.array(self.inertia_vech, float).reshape(6)
        c.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "com", c)
        object.__setattr__(self, "inertia_vech", v)

    @property
    def inertia(self) -> np.ndarray:
        return unvech(self.inertia_vech)

    @property
    def phi(self) -> np.ndarray:
        """Linear parameter vector (m, m*c, vech(I))."""
        return np.concatenate([[self.mass], self.mass * self.com, self.inertia_vech])

    @classmethod
    def from_phi(cls, phi, frame="sensor") -> "InertialParams":
        phi = np.asarray(phi, float)
        m = phi[0]
        com = phi[1:4] / m if m != 0 else np.zeros(3)
        return cls(m, com, phi[4:10], frame)

    def to_dict(self) -> dict:
        return {
            "mass": self.mass,
            "com": self.com.tolist(),
            "inertia_vech": self.inertia_vech.tolist(),
            "frame": self.frame,
        }

    @classmethod
    def from_dict(cls, d) -> "InertialParams":
        return cls(d["mass"], d["com"], d["inertia_vech"], d.get("frame", "sensor"))


def centroid(points) -> np.ndarray:
    P = np.asarray(points, float).reshape(-1, 3)
    if len(P) == 0:
        raise EmptyPart("part has no points")
    return P.mean(axis=0)


def point_inertia(p, m: float) -> np.ndarray:
    """Inertia of a point mass about the origin, -m [p]x [p]x."""
    S = skew(p)
    return -m * (S @ S)


def _spread(points, weights=None):
    """Centroid and per-unit-mass inertia about the centroid."""
    P = np.asarray(points, float).reshape(-1, 3)
    if len(P) == 0:
        raise EmptyPart("part has no points")
    w = np.full(len(P), 1.0 / len(P)) if weights is None else np.asarray(weights, float) / np.sum(weights)
    c = w @ P
    Q = P - c
    S = (Q * w[:, None]).T @ Q
    return c, np.trace(S) * np.eye(3) - S


def part_params_sensor(points, mass: float, pose: Pose, weights=None, frame="sensor") -> InertialParams:
    """Parameters of a homogeneous part from its point masses, expressed in the sensor frame.

    `points` are object-frame positions; `pose` maps object to sensor
    coordinates.  The spread term is taken about the part centroid, then
    rotated and shifted to the sensor origin by the parallel-axis term.
    """
    c_b, J = _spread(points, weights)
    R = pose.rotation
    c_s = R @ c_b + pose.translation
    S = skew(c_s)
    I = mass * (R @ J @ R.T) - mass * (S @ S)
    return InertialParams(mass, c_s, vech(I), frame)


def compose(parts) -> InertialParams:
    parts = list(parts)
    if not parts:
        raise ZeroTotalMass("no parts")
    frame = parts[0].frame
    if any(p.frame != frame for p in parts):
        raise FrameMismatch("parts are expressed in different frames")
    m = sum(p.mass for p in parts)
    if m == 0:
        raise ZeroTotalMass("total mass is zero, centre of mass undefined")
    com = sum(p.mass * p.com for p in parts) / m
    I = sum(p.inertia_vech for p in parts)
    return InertialParams(m, com, I, frame)


def transform_params(params: InertialParams, pose: Pose, frame: str | None = None) -> InertialParams:
    """Re-express parameters in a parent frame given the child->parent pose."""
    m, c = params.mass, params.com
    Sc = skew(c)
    I_com = params.inertia + m * (Sc @ Sc)
    R = pose.rotation
    c2 = R @ c + pose.translation
    S2 = skew(c2)
    I2 = R @ I_com @ R.T - m * (S2 @ S2)
    return InertialParams(m, c2, vech(I2), frame or params.frame)


def pseudoinertia(params: InertialParams) -> np.ndarray:
    I = params.inertia
    m = params.mass
    h = m * params.com
    P = np.zeros((4, 4))
    P[:3, :3] = 0.5 * np.trace(I) * np.eye(3) - I
    P[:3, 3] = h
    P[3, :3] = h
    P[3, 3] = m
    return P


def is_consistent(params: InertialParams, tol: float = CONSISTENCY_TOL) -> bool:
    if not params.mass > 0:
        return False
    return bool(np.linalg.eigvalsh(pseudoinertia(params)).min() > -tol)
