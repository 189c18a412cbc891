import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import random_rotation
from hps import io
from hps.errors import FormatError
from hps.geom import PointCloud, box_mesh
from hps.inertia import Pose
from hps.synth import add_noise, gen_stop_and_go, preset_noise, simulate_wrench


def test_obj_round_trip(tmp_path):
    m = box_mesh((1, 2, 3), (0.1, 0.2, 0.3))
    io.write_obj(tmp_path / "m.obj", m)
    r = io.read_obj(tmp_path / "m.obj")
    assert np.array_equal(r.vertices, m.vertices) and np.array_equal(r.faces, m.faces)


def test_obj_polygons_and_errors(tmp_path):
    p = tmp_path / "q.obj"
    p.write_text("# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\n")
    assert io.read_obj(p).faces.tolist() == [[0, 1, 2], [0, 2, 3]]
    p.write_text("v 0 0 0\nf 1 2 3\n")
    with pytest.raises(FormatError):
        io.read_obj(p)
    p.write_text("v 0 zero 0\n")
    with pytest.raises(FormatError):
        io.read_obj(p)


def test_ply_round_trip(tmp_path, dumbbell):
    c = dumbbell.cloud
    io.write_ply(tmp_path / "c.ply", c)
    r = io.read_ply(tmp_path / "c.ply")
    assert np.allclose(r.positions, c.positions, rtol=1e-7, atol=1e-9)
    assert np.array_equal(r.colours, c.colours) and np.array_equal(r.labels, c.labels)
    assert np.allclose(r.normals, c.normals, atol=1e-7)


def test_ply_without_normals_or_labels(tmp_path):
    c = PointCloud(np.eye(3))
    io.write_ply(tmp_path / "c.ply", c)
    r = io.read_ply(tmp_path / "c.ply")
    assert r.normals is None and r.labels is None
    io.write_ply(tmp_path / "l.ply", c, labels=[3, 4, 5])
    assert io.read_ply(tmp_path / "l.ply").labels.tolist() == [3, 4, 5]


def test_ply_errors(tmp_path):
    p = tmp_path / "bad.ply"
    p.write_text("not a ply\n")
    with pytest.raises(FormatError):
        io.read_ply(p)
    p.write_text("ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n")
    with pytest.raises(FormatError):
        io.read_ply(p)
    p.write_text("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
                 "property float z\nend_header\n0 0 0\n")
    with pytest.raises(FormatError):
        io.read_ply(p)


def test_wrench_csv_round_trip(tmp_path, dumbbell):
    s = add_noise(simulate_wrench(dumbbell.gt_params, gen_stop_and_go(1)), preset_noise("low", 1))
    io.write_wrench_csv(tmp_path / "w.csv", s)
    assert (tmp_path / "w.csv").read_text().splitlines()[0] == ",".join(io.WRENCH_HEADER)
    r = io.read_wrench_csv(tmp_path / "w.csv")
    assert len(r) == len(s)
    for a, b in zip(s, r):
        for k in ("force", "torque", "gravity_s", "lin_acc", "ang_acc", "ang_vel"):
            assert np.array_equal(getattr(a, k), getattr(b, k))


def test_wrench_csv_errors(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("t,fx\n0,1\n")
    with pytest.raises(FormatError):
        io.read_wrench_csv(p)
    p.write_text(",".join(io.WRENCH_HEADER) + "\n" + ",".join(["nan"] * 19) + "\n")
    with pytest.raises(FormatError):
        io.read_wrench_csv(p)


@settings(max_examples=20, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.integers(0, 2**31 - 1), st.integers(1, 5))
def test_poses_round_trip(tmp_path, seed, n):
    rng = np.random.default_rng(seed)
    poses = [Pose(random_rotation(rng), rng.normal(size=3)) for _ in range(n)]
    io.write_poses(tmp_path / "p.json", poses)
    back = io.read_poses(tmp_path / "p.json")
    assert all(np.array_equal(a.rotation, b.rotation) and np.array_equal(a.translation, b.translation)
               for a, b in zip(poses, back))


def test_json_numpy_and_errors(tmp_path):
    io.write_json(tmp_path / "a.json", {"x": np.arange(3), "y": np.float64(1.5)})
    assert io.read_json(tmp_path / "a.json") == {"x": [0, 1, 2], "y": 1.5}
    (tmp_path / "b.json").write_text("{oops")
    with pytest.raises(FormatError):
        io.read_json(tmp_path / "b.json")
    (tmp_path / "c.json").write_text('[{"R": [1, 0]}]')
    with pytest.raises(FormatError):
        io.read_poses(tmp_path / "c.json")
