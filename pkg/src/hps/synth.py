"""Synthetic multi-part objects, stop-and-go trajectories, wrench simulation and sensor noise."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import InvalidSpec, NonPositiveDensity, OverlappingParts
from .geom import PointCloud, TriMesh, box_mesh, cylinder_mesh, sample_surface, sphere_mesh
from .identify import WrenchSample
from .inertia import InertialParams, Pose, compose, transform_params, vech

GRAVITY_W = np.array([0.0, 0.0, -9.81])
COLOUR_JITTER = 3.0


# ------------------------------------------------------------------ primitives


@dataclass(frozen=True)
class PartSpec:
    shape: str  # "box" | "cylinder" | "sphere"
    size: tuple  # box: extents (3); cylinder: (radius, height); sphere: (radius,)
    pose: Pose = field(default_factory=Pose.identity)
    density: float = 1000.0
    colour: tuple = (128, 128, 128)
    name: str = ""

    @property
    def volume(self) -> float:
        if self.shape == "box":
            return float(np.prod(self.size))
        if self.shape == "cylinder":
            r, h = self.size
            return float(np.pi * r * r * h)
        if self.shape == "sphere":
            return float(4.0 / 3.0 * np.pi * self.size[0] ** 3)
        raise InvalidSpec(f"unknown shape {self.shape!r}")

    @property
    def mass(self) -> float:
        return self.density * self.volume

    def inertia_centroidal(self) -> np.ndarray:
        """Closed-form solid inertia about the part centre, in the part frame."""
        m = self.mass
        if self.shape == "box":
            a, b, c = self.size
            return m / 12.0 * np.diag([b * b + c * c, a * a + c * c, a * a + b * b])
        if self.shape == "cylinder":
            r, h = self.size
            ixx = m * (3 * r * r + h * h) / 12.0
            return np.diag([ixx, ixx, 0.5 * m * r * r])
        if self.shape == "sphere":
            return np.eye(3) * 0.4 * m * self.size[0] ** 2
        raise InvalidSpec(f"unknown shape {self.shape!r}")

    def params_object(self) -> InertialParams:
        """Part parameters in the object frame (inertia about the object origin)."""
        local = InertialParams(self.mass, np.zeros(3), vech(self.inertia_centroidal()), "part")
        return transform_params(local, self.pose, "object")

    def mesh(self) -> TriMesh:
        if self.shape == "box":
            m = box_mesh(self.size)
        elif self.shape == "cylinder":
            m = cylinder_mesh(*self.size)
        elif self.shape == "sphere":
            m = sphere_mesh(self.size[0], 3)
        else:
            raise InvalidSpec(f"unknown shape {self.shape!r}")
        return m.transformed(self.pose.rotation, self.pose.translation)

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        """Points (object frame) inside the solid grown by `tol` (negative shrinks)."""
        q = (np.asarray(points, float) - self.pose.translation) @ self.pose.rotation
        if self.shape == "box":
            return np.all(np.abs(q) <= 0.5 * np.asarray(self.size) + tol, axis=1)
        if self.shape == "cylinder":
            r, h = self.size
            return (np.hypot(q[:, 0], q[:, 1]) <= r + tol) & (np.abs(q[:, 2]) <= 0.5 * h + tol)
        return np.linalg.norm(q, axis=1) <= self.size[0] + tol

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        v = self.mesh().vertices
        if self.shape != "box":
            # facets lie inside the true surface; pad to the analytic extent
            pad = self.size[0] * (1 - np.cos(np.pi / 48))
            return v.min(axis=0) - pad, v.max(axis=0) + pad
        return v.min(axis=0), v.max(axis=0)

    def to_dict(self) -> dict:
        d = {"shape": self.shape, "pose": self.pose.to_dict(), "density": self.density,
             "colour": list(self.colour), "name": self.name}
        if self.shape == "box":
            d["extents"] = list(self.size)
        elif self.shape == "cylinder":
            d["radius"], d["height"] = self.size
        else:
            d["radius"] = self.size[0]
        return d

    @classmethod
    def from_dict(cls, d) -> "PartSpec":
        shape = d.get("shape")
        try:
            if shape == "box":
                size = tuple(float(x) for x in d["extents"])
                if len(size) != 3:
                    raise InvalidSpec("box extents need 3 values")
            elif shape == "cylinder":
                size = (float(d["radius"]), float(d["height"]))
            elif shape == "sphere":
                size = (float(d["radius"]),)
            else:
                raise InvalidSpec(f"unknown shape {shape!r}")
            pose = Pose.from_dict(d["pose"]) if "pose" in d else Pose.identity()
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidSpec(f"bad part entry: {exc}") from exc
        if any(not s > 0 for s in size):
            raise InvalidSpec("part dimensions must be positive")
        return cls(shape, size, pose, float(d.get("density", 1000.0)),
                   tuple(int(c) for c in d.get("colour", (128, 128, 128))), d.get("name", ""))


@dataclass(frozen=True)
class ObjectSpec:
    parts: tuple
    grasp: Pose = field(default_factory=Pose.identity)  # object frame -> sensor frame
    name: str = "object"

    def to_dict(self) -> dict:
        return {"name": self.name, "parts": [p.to_dict() for p in self.parts],
                "grasp": self.grasp.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "ObjectSpec":
        if not isinstance(d, dict) or not d.get("parts"):
            raise InvalidSpec("object spec needs a non-empty 'parts' list")
        parts = tuple(PartSpec.from_dict(p) for p in d["parts"])
        try:
            grasp = Pose.from_dict(d["grasp"]) if "grasp" in d else Pose.identity()
        except (KeyError, ValueError) as exc:
            raise InvalidSpec(f"bad grasp pose: {exc}") from exc
        return cls(parts, grasp, d.get("name", "object"))


@dataclass(frozen=True)
class SynthObject:
    spec: ObjectSpec
    mesh: TriMesh
    cloud: PointCloud
    gt_params: InertialParams
    gt_labels: np.ndarray
    part_params: tuple  # per part, sensor frame


def _check_spec(spec: ObjectSpec, seed: int = 0) -> None:
    for p in spec.parts:
        if not p.density > 0:
            raise NonPositiveDensity(f"part {p.name or p.shape} has density {p.density}")
    rng = np.random.default_rng(seed)
    parts = spec.parts
    for i in range(len(parts)):
        lo_i, hi_i = parts[i].aabb()
        for j in range(i + 1, len(parts)):
            lo_j, hi_j = parts[j].aabb()
            lo, hi = np.maximum(lo_i, lo_j), np.minimum(hi_i, hi_j)
            if np.any(hi - lo <= 1e-12):
                continue
            g = np.stack(np.meshgrid(*[np.linspace(lo[a], hi[a], 14)[1:-1] for a in range(3)],
                                     indexing="ij"), -1).reshape(-1, 3)
            pts = np.vstack([g, lo + rng.random((2000, 3)) * (hi - lo)])
            shrink = -1e-9 * float(np.linalg.norm(hi - lo)) - 1e-12
            if np.any(parts[i].contains(pts, shrink) & parts[j].contains(pts, shrink)):
                raise OverlappingParts(f"parts {i} and {j} overlap")


def build_object(spec: ObjectSpec, n_points: int = 4000, seed: int = 0,
                 jitter: float = COLOUR_JITTER) -> SynthObject:
    """Mesh, labelled coloured cloud and closed-form ground truth for an object spec.

    Surface samples of a part that fall inside or on another part are dropped,
    so interfaces between parts are not visible in the cloud.
    """
    _check_spec(spec, seed)
    rng = np.random.default_rng(seed)
    meshes = [p.mesh() for p in spec.parts]
    areas = np.array([m.face_areas.sum() for m in meshes])
    pts, cols, nrms, labels = [], [], [], []
    for j, (part, mesh) in enumerate(zip(spec.parts, meshes)):
        n_j = max(1, int(round(n_points * areas[j] / areas.sum())))
        c = sample_surface(mesh, n_j, seed=int(rng.integers(2**31)), colour=part.colour)
        keep = np.ones(n_j, bool)
        for k, other in enumerate(spec.parts):
            if k != j:
                keep &= ~other.contains(c.positions, 1e-9)
        P = c.positions[keep]
        col = np.asarray(part.colour, float) + rng.normal(0.0, jitter, (len(P), 3))
        pts.append(P)
        cols.append(np.clip(np.rint(col), 0, 255))
        nrms.append(c.normals[keep])
        labels.append(np.full(len(P), j))
    labels = np.concatenate(labels)
    cloud = PointCloud(np.vstack(pts), np.vstack(cols), np.vstack(nrms), labels)
    part_params = tuple(transform_params(p.params_object(), spec.grasp, "sensor") for p in spec.parts)
    return SynthObject(spec, TriMesh.concatenate(meshes), cloud, compose(part_params), labels, part_params)


def _box(extents, centre, density, colour, name) -> PartSpec:
    return PartSpec("box", tuple(extents), Pose(np.eye(3), centre), density, colour, name)


STEEL, WOOD, RUBBER, ALUMINIUM, NYLON, OAK = 7800.0, 700.0, 1100.0, 2700.0, 1150.0, 750.0
GREY, BROWN, BLACK = (150, 150, 160), (160, 110, 60), (40, 40, 40)
RED, BLUE, GREEN, YELLOW = (200, 30, 30), (30, 60, 200), (40, 170, 60), (230, 200, 40)


def builtin_specs() -> dict[str, ObjectSpec]:
    """Desk-scale tool analogues; box faces sit on a 5 mm lattice."""
    rz90 = Rotation.from_euler("x", 90, degrees=True).as_matrix()
    ry90 = Rotation.from_euler("y", 90, degrees=True).as_matrix()
    specs = {
        "cube": ObjectSpec((_box((0.1, 0.1, 0.1), (0, 0, 0), 1000.0, GREY, "cube"),),
                           Pose(np.eye(3), (0.0, 0.0, 0.08)), "cube"),
        "bar": ObjectSpec((_box((0.2, 0.04, 0.02), (0, 0, 0), ALUMINIUM, GREY, "bar"),),
                          Pose(np.eye(3), (0.05, 0.0, 0.04)), "bar"),
        "ball": ObjectSpec((PartSpec("sphere", (0.05,), Pose.identity(), RUBBER, RED, "ball"),),
                           Pose(np.eye(3), (0.0, 0.0, 0.08)), "ball"),
        "dumbbell3": ObjectSpec((
            _box((0.08, 0.05, 0.05), (-0.04, 0.0, 0.0), RUBBER, BLACK, "grip"),
            _box((0.16, 0.04, 0.04), (0.08, 0.0, 0.0), WOOD, BROWN, "handle"),
            # head hangs off one side so the three centroids are far from collinear
            _box((0.04, 0.08, 0.02), (0.18, 0.04, 0.0), STEEL, GREY, "head"),
        ), Pose(np.eye(3), (0.05, 0.0, 0.06)), "dumbbell3"),
        "mallet2": ObjectSpec((
            _box((0.20, 0.03, 0.03), (0.0, 0.0, 0.0), OAK, BROWN, "handle"),
            PartSpec("cylinder", (0.03, 0.10), Pose(rz90, (0.13, 0.0, 0.0)), RUBBER, BLACK, "head"),
        ), Pose(np.eye(3), (0.06, 0.0, 0.05)), "mallet2"),
        "screwdriver2": ObjectSpec((
            PartSpec("cylinder", (0.02, 0.10), Pose(ry90, (0.0, 0.0, 0.0)), NYLON, YELLOW, "handle"),
            _box((0.12, 0.01, 0.01), (0.11, 0.0, 0.0), STEEL, GREY, "shaft"),
        ), Pose(np.eye(3), (0.02, 0.0, 0.05)), "screwdriver2"),
        "clamp3": ObjectSpec((
            _box((0.03, 0.03, 0.16), (0.0, 0.0, 0.0), STEEL, GREY, "spine"),
            _box((0.10, 0.03, 0.02), (0.065, 0.0, 0.07), ALUMINIUM, BLUE, "upper_jaw"),
            _box((0.06, 0.03, 0.03), (0.045, 0.0, -0.065), NYLON, RED, "lower_jaw"),
        ), Pose(np.eye(3), (0.0, 0.0, 0.12)), "clamp3"),
        "corner4": ObjectSpec((
            _box((0.06, 0.06, 0.06), (0.0, 0.0, 0.0), STEEL, GREY, "hub"),
            _box((0.12, 0.02, 0.02), (0.09, 0.0, 0.0), ALUMINIUM, RED, "arm_x"),
            _box((0.02, 0.10, 0.02), (0.0, 0.08, 0.0), NYLON, GREEN, "arm_y"),
            _box((0.02, 0.02, 0.08), (0.0, 0.0, 0.07), OAK, BLUE, "arm_z"),
        ), Pose(np.eye(3), (0.0, 0.0, 0.09)), "corner4"),
        "flat4": ObjectSpec((
            _box((0.06, 0.06, 0.02), (0.0, 0.0, 0.0), STEEL, GREY, "hub"),
            _box((0.10, 0.02, 0.02), (0.08, 0.0, 0.0), ALUMINIUM, RED, "arm_px"),
            _box((0.10, 0.02, 0.02), (-0.08, 0.0, 0.0), NYLON, GREEN, "arm_nx"),
            _box((0.02, 0.08, 0.02), (0.0, 0.07, 0.0), OAK, BLUE, "arm_py"),
        ), Pose(np.eye(3), (0.0, 0.0, 0.06)), "flat4"),
    }
    return specs


BENCHMARK_OBJECTS = ("dumbbell3", "mallet2", "screwdriver2", "clamp3", "corner4")


def builtin_cell_size(name: str) -> float | None:
    """Voxel size that keeps box faces on cell boundaries for the built-ins."""
    return 0.005 if name in builtin_specs() else None


# ---------------------------------------------------------------- trajectories


@dataclass(frozen=True)
class TrajectorySpec:
    poses: tuple  # sensor frame in world, one per dwell
    dwell: float = 1.0
    transit: float = 1.5
    sample_rate: float = 100.0
    accel_fraction: float = 0.5  # 0.5 gives a triangular speed profile

    def __post_init__(self):
        if len(self.poses) < 1:
            raise ValueError("trajectory needs at least one pose")
        if not (self.dwell > 0 and self.transit > 0 and self.sample_rate > 0):
            raise ValueError("dwell, transit and sample_rate must be positive")
        if not 0 < self.accel_fraction <= 0.5:
            raise ValueError("accel_fraction must lie in (0, 0.5]")

    @property
    def duration(self) -> float:
        n = len(self.poses)
        return n * self.dwell + (n - 1) * self.transit


def _align_down(d) -> np.ndarray:
    """Rotation R (sensor->world) with R @ d = -z_world."""
    d = np.asarray(d, float) / np.linalg.norm(d)
    target = np.array([0.0, 0.0, -1.0])
    if np.allclose(d, target):
        return np.eye(3)
    if np.allclose(d, -target):
        return Rotation.from_rotvec([np.pi, 0, 0]).as_matrix()
    axis = np.cross(d, target)
    ang = np.arccos(np.clip(d @ target, -1, 1))
    return Rotation.from_rotvec(axis / np.linalg.norm(axis) * ang).as_matrix()


def gen_stop_and_go(n_axes: int = 3, grasp: Pose | None = None, dwell: float = 1.0,
                    transit: float = 1.5, sample_rate: float = 100.0,
                    base=(0.5, 0.0, 0.4)) -> TrajectorySpec:
    """Poses that align gravity with +/- each object axis in turn.

    The negative-axis pose is the positive one flipped by pi about world x, so
    each pair differs by a half turn about a horizontal axis.
    """
    if n_axes not in (1, 2, 3):
        raise ValueError("n_axes must be 1, 2 or 3")
    R_bs = np.eye(3) if grasp is None else grasp.rotation
    flip = Rotation.from_rotvec([np.pi, 0, 0]).as_matrix()
    base = np.asarray(base, float)
    poses = []
    for k in range(n_axes):
        d = R_bs[:, k]  # object axis k in sensor coordinates
        R_up = _align_down(d)
        for sign, R in enumerate((R_up, flip @ R_up)):
            lift = np.array([0.0, 0.02 * (k - 1), 0.05 * ((2 * k + sign) % 3)])
            poses.append(Pose(R, base + lift))
    return TrajectorySpec(tuple(poses), dwell, transit, sample_rate)


def _trapezoid(tau, T, frac):
    """Normalized progress s(tau) and derivatives; accelerate, cruise, decelerate."""
    ta = frac * T
    v = 1.0 / (T - ta)
    acc = v / ta
    up = tau < ta
    down = tau >= T - ta
    s = np.where(up, 0.5 * acc * tau**2,
                 np.where(down, 1 - 0.5 * acc * (T - tau) ** 2, 0.5 * v * ta + v * (tau - ta)))
    sd = np.where(up, acc * tau, np.where(down, acc * (T - tau), v))
    sdd = np.where(up, acc, np.where(down, -acc, 0.0))
    return s, sd, sdd


@dataclass(frozen=True)
class Kinematics:
    t: np.ndarray
    R: np.ndarray  # (K,3,3) sensor->world
    p: np.ndarray  # (K,3) sensor origin in world
    ang_vel: np.ndarray  # sensor frame
    ang_acc: np.ndarray
    lin_acc: np.ndarray
    dwell: np.ndarray


def trajectory_kinematics(traj: TrajectorySpec, rate: float | None = None, t=None) -> Kinematics:
    """Pose and sensor-frame kinematics along the dwell/transit schedule."""
    rate = traj.sample_rate if rate is None else rate
    if t is None:
        t = np.arange(int(np.floor(traj.duration * rate + 1e-9))) / rate
    t = np.asarray(t, float)
    K = len(t)
    R = np.empty((K, 3, 3))
    p = np.empty((K, 3))
    w_w = np.zeros((K, 3))
    a_w = np.zeros((K, 3))
    al_w = np.zeros((K, 3))
    dwell = np.zeros(K, bool)
    period = traj.dwell + traj.transit
    seg = np.minimum((t // period).astype(int), len(traj.poses) - 1)
    tau = t - seg * period
    for k in range(len(traj.poses)):
        P0 = traj.poses[k]
        sel = seg == k
        still = sel & ((tau < traj.dwell) | (k == len(traj.poses) - 1))
        R[still] = P0.rotation
        p[still] = P0.translation
        dwell[still] = True
        move = sel & ~still
        if not move.any():
            continue
        P1 = traj.poses[k + 1]
        rv = Rotation.from_matrix(P1.rotation @ P0.rotation.T).as_rotvec()
        s, sd, sdd = _trapezoid(tau[move] - traj.dwell, traj.transit, traj.accel_fraction)
        R[move] = Rotation.from_rotvec(s[:, None] * rv).as_matrix() @ P0.rotation
        dp = P1.translation - P0.translation
        p[move] = P0.translation + s[:, None] * dp
        w_w[move] = sd[:, None] * rv
        al_w[move] = sdd[:, None] * rv
        a_w[move] = sdd[:, None] * dp
    Rt = np.transpose(R, (0, 2, 1))
    to_s = lambda v: np.einsum("kij,kj->ki", Rt, v)  # noqa: E731
    return Kinematics(t, R, p, to_s(w_w), to_s(al_w), to_s(a_w), dwell)


def simulate_wrench(gt_params: InertialParams, traj: TrajectorySpec, rate: float | None = None):
    """Noiseless load wrench on the sensor along a trajectory.

    At rest this reduces to f = m g_s and tau = c_s x f; while moving, the
    inertial and gyroscopic terms of the rigid-body equations are included.
    """
    kin = trajectory_kinematics(traj, rate)
    m, h, I = gt_params.mass, gt_params.mass * gt_params.com, gt_params.inertia
    g_s = np.einsum("kji,j->ki", kin.R, GRAVITY_W)
    ga = g_s - kin.lin_acc
    w, al = kin.ang_vel, kin.ang_acc
    f = m * ga - np.cross(al, h) - np.cross(w, np.cross(w, h))
    tau = np.cross(h, ga) - al @ I.T - np.cross(w, w @ I.T)
    return [
        WrenchSample(float(kin.t[k]), f[k], tau[k], g_s[k], kin.lin_acc[k], al[k], w[k], (), bool(kin.dwell[k]))
        for k in range(len(kin.t))
    ]


# ----------------------------------------------------------------------- noise


@dataclass(frozen=True)
class NoiseModel:
    sigma_ang_acc: float = 0.0
    sigma_lin_acc: float = 0.0
    sigma_force: float = 0.0
    sigma_torque: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if min(self.sigma_ang_acc, self.sigma_lin_acc, self.sigma_force, self.sigma_torque) < 0:
            raise ValueError("noise standard deviations must be non-negative")


NOISE_LEVELS = {
    "none": (0.0, 0.0, 0.0, 0.0),
    "low": (0.25, 0.025, 0.05, 0.0025),
    "moderate": (0.5, 0.05, 0.1, 0.005),
    "high": (1.0, 0.1, 0.33, 0.0067),
}


def preset_noise(level: str, seed: int = 0) -> NoiseModel:
    try:
        return NoiseModel(*NOISE_LEVELS[level], seed=seed)
    except KeyError:
        raise ValueError(f"unknown noise level {level!r}; choose from {sorted(NOISE_LEVELS)}") from None


def add_noise(samples, model: NoiseModel):
    """Per-axis zero-mean Gaussian noise on accelerations, force and torque.

    Gravity and angular velocity are left exact.
    """
    K = len(samples)
    rng = np.random.default_rng(model.seed)
    n_al = rng.normal(0.0, 1.0, (K, 3)) * model.sigma_ang_acc
    n_a = rng.normal(0.0, 1.0, (K, 3)) * model.sigma_lin_acc
    n_f = rng.normal(0.0, 1.0, (K, 3)) * model.sigma_force
    n_t = rng.normal(0.0, 1.0, (K, 3)) * model.sigma_torque
    return [
        replace(s, ang_acc=s.ang_acc + n_al[k], lin_acc=s.lin_acc + n_a[k],
                force=s.force + n_f[k], torque=s.torque + n_t[k])
        for k, s in enumerate(samples)
    ]
