"""Object x noise x seed x algorithm benchmark matrix with reproducible per-row seeds.

Row seeds come from ``SeedSequence(root_seed, spawn_key=(i_obj, i_level, i_seed))``;
the first word seeds the cloud sampling and segmentation, the second the
sensor noise.  Both algorithms of a scenario see the same noisy samples.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import HPSError, InvalidSpec, NotSPD
from .identify import identify_hps, identify_ols
from .metrics import riemannian_error, size_errors
from .segment import SegmentParams, segment_object
from .synth import (NOISE_LEVELS, ObjectSpec, add_noise, build_object, builtin_cell_size, builtin_specs,
                    gen_stop_and_go, preset_noise, simulate_wrench)

ALGORITHMS = ("hps", "ols")
COLUMNS = ("object", "noise", "seed", "algo", "e_m", "e_C_mean", "e_J_mean", "e_rie", "consistent",
           "cond", "n_samples", "status", "error")


@dataclass(frozen=True)
class BenchmarkConfig:
    objects: tuple = ("dumbbell3", "mallet2", "screwdriver2", "clamp3", "corner4")
    noise_levels: tuple = ("none", "low", "moderate", "high")
    seeds: int = 4
    algorithms: tuple = ALGORITHMS
    out_dir: str = "bench_out"
    root_seed: int = 0
    n_points: int = 4000
    cell_size: float | None = None
    workers: int = 1
    specs: dict = field(default_factory=dict, repr=False)  # name -> spec dict for non built-ins

    def __post_init__(self):
        if not self.objects or not self.noise_levels or self.seeds < 1:
            raise InvalidSpec("benchmark needs at least one object, one noise level and one seed")
        bad = [lv for lv in self.noise_levels if lv not in NOISE_LEVELS]
        if bad:
            raise InvalidSpec(f"unknown noise levels {bad}")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad or not self.algorithms:
            raise InvalidSpec(f"algorithms must be a non-empty subset of {ALGORITHMS}")
        known = set(builtin_specs()) | set(self.specs)
        missing = [o for o in self.objects if o not in known]
        if missing:
            raise InvalidSpec(f"unknown objects {missing}")

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkConfig":
        d = dict(d)
        objs, specs = [], {}
        for o in d.pop("objects", cls.objects):
            if isinstance(o, dict):
                spec = ObjectSpec.from_dict(o)
                specs[spec.name] = o
                objs.append(spec.name)
            else:
                objs.append(str(o))
        for k in ("noise_levels", "algorithms"):
            if k in d:
                d[k] = tuple(d[k])
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise InvalidSpec(f"unknown config keys {sorted(unknown)}")
        return cls(objects=tuple(objs), specs=specs, **d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["objects"] = list(self.objects)
        return d


def row_seeds(root: int, i_obj: int, i_level: int, i_seed: int) -> tuple[int, int]:
    ss = np.random.SeedSequence(root, spawn_key=(i_obj, i_level, i_seed))
    a, b = ss.generate_state(2)
    return int(a), int(b)


def _spec(cfg: BenchmarkConfig, name: str) -> ObjectSpec:
    if name in cfg.specs:
        return ObjectSpec.from_dict(cfg.specs[name])
    return builtin_specs()[name]


_CLEAN: dict = {}


def _clean_samples(spec: ObjectSpec):
    """Noiseless wrench for the object's default trajectory (deterministic, so cached)."""
    key = json.dumps(spec.to_dict(), sort_keys=True)
    if key not in _CLEAN:
        obj = build_object(spec, n_points=16, seed=0)
        _CLEAN[key] = simulate_wrench(obj.gt_params, gen_stop_and_go(3, spec.grasp))
    return _CLEAN[key]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(round(x, 10))
    return str(x)


def run_scenario(cfg: BenchmarkConfig, i_obj: int, i_level: int, i_seed: int) -> list[dict]:
    name = cfg.objects[i_obj]
    level = cfg.noise_levels[i_level]
    s_geo, s_noise = row_seeds(cfg.root_seed, i_obj, i_level, i_seed)
    base = {"object": name, "noise": level, "seed": i_seed}
    rows = []
    try:
        spec = _spec(cfg, name)
        obj = build_object(spec, n_points=cfg.n_points, seed=s_geo % 2**31)
        samples = add_noise(_clean_samples(spec), preset_noise(level, s_noise))
        sensor_mesh = obj.mesh.transformed(spec.grasp.rotation, spec.grasp.translation)
        extents = sensor_mesh.extents
        seg = None
        if "hps" in cfg.algorithms:
            cs = cfg.cell_size if cfg.cell_size is not None else builtin_cell_size(name)
            k = min(4, len(spec.parts))
            seg = segment_object(obj.cloud, obj.mesh, SegmentParams(cell_size=cs, target_parts=k, seed=s_geo % 2**31))
    except HPSError as exc:
        return [dict(base, algo=a, error=f"{type(exc).__name__}: {exc}") for a in cfg.algorithms]
    for algo in cfg.algorithms:
        row = dict(base, algo=algo)
        try:
            if algo == "hps":
                cx = seg.complex
                parts = [cx.centroids[seg.cell_labels == i] for i in range(seg.n_parts)]
                res = identify_hps(samples, parts, spec.grasp)
            else:
                res = identify_ols(samples)
            err = size_errors(res.params, obj.gt_params, extents)
            try:
                rie = riemannian_error(res.params, obj.gt_params)
            except NotSPD:
                rie = float("nan")
            row.update(e_m=err["e_m"], e_C_mean=err["e_C_mean"], e_J_mean=err["e_J_mean"], e_rie=rie,
                       consistent=bool(res.consistent), cond=res.cond, n_samples=res.n_samples,
                       status=res.solver_status, error="")
        except HPSError as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def _job(args):
    cfg, idx = args
    return idx, run_scenario(cfg, *idx)


def run_benchmark(cfg: BenchmarkConfig, progress=None) -> list[dict]:
    jobs = [(i, j, k) for i in range(len(cfg.objects)) for j in range(len(cfg.noise_levels))
            for k in range(cfg.seeds)]
    out = {}
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            for idx, rows in ex.map(_job, [(cfg, j) for j in jobs]):
                out[idx] = rows
                if progress:
                    progress(len(out), len(jobs))
    else:
        for j in jobs:
            out[j] = run_scenario(cfg, *j)
            if progress:
                progress(len(out), len(jobs))
    return [r for j in jobs for r in out[j]]


def table_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in COLUMNS])
    return buf.getvalue()


def summarize(rows) -> dict:
    """Per (algo, noise) means over successful rows; e_rie averaged over finite values."""
    groups = {}
    for r in rows:
        groups.setdefault((r["algo"], r["noise"]), []).append(r)
    out = []
    for (algo, noise), rs in groups.items():
        ok = [r for r in rs if not r.get("error")]
        rie = [r["e_rie"] for r in ok if np.isfinite(r["e_rie"])]
        mean = lambda k: float(np.mean([r[k] for r in ok])) if ok else float("nan")  # noqa: E731
        out.append({
            "algo": algo, "noise": noise, "rows": len(rs), "failed": len(rs) - len(ok),
            "e_m": mean("e_m"), "e_C_mean": mean("e_C_mean"), "e_J_mean": mean("e_J_mean"),
            "e_rie": float(np.mean(rie)) if rie else None, "e_rie_na": len(ok) - len(rie),
            "consistent_pct": 100.0 * float(np.mean([r["consistent"] for r in ok])) if ok else None,
            "cond": mean("cond"),
        })
    return {"groups": out, "size_error_normalizers": "e_C: bbox extent per axis; e_J: m*e_a*e_b "
            "(diagonal: the two other axes, off-diagonal: its own pair); bbox in the sensor frame"}
