"""Command-line front end.

Exit codes: 0 success, 2 bad input, 3 segmentation failure, 4 no stalled samples.
Diagnostics go to stderr; with --quiet stdout carries only the data payload.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .bench import BenchmarkConfig, run_benchmark, summarize, table_csv
from .errors import (DisconnectedComplex, EmptyGrid, HPSError, KOutOfRange, NoStalledSamples, NotWatertight,
                     ResolutionTooCoarse)
from .identify import identify_hps, identify_ols
from .inertia import InertialParams
from .metrics import SegPair, gce, riemannian_error, size_errors, use_error
from .segment import SUITE_WEIGHTS, ClusterWeights, SegmentParams, segment_object
from .synth import (ObjectSpec, add_noise, build_object, builtin_specs, gen_stop_and_go, preset_noise,
                    simulate_wrench)

EXIT_OK, EXIT_INPUT, EXIT_SEGMENT, EXIT_NO_STALL = 0, 2, 3, 4
SEGMENTATION_ERRORS = (DisconnectedComplex, ResolutionTooCoarse, EmptyGrid, KOutOfRange, NotWatertight)


class InputError(Exception):
    pass


def _seed(arg):
    if arg is not None:
        return arg
    return int(os.environ.get("HPS_SEED", 0))


def _log(args, msg):
    if not args.quiet:
        print(msg, file=sys.stderr)


def _emit(args, payload):
    print(json.dumps(payload, indent=None if args.quiet else 1, default=io._default))


def _load_spec(src) -> ObjectSpec:
    if src in builtin_specs():
        return builtin_specs()[src]
    p = Path(src)
    if not p.exists():
        raise InputError(f"{src}: neither a built-in object ({', '.join(builtin_specs())}) nor a file")
    return ObjectSpec.from_dict(io.read_json(p))


# ------------------------------------------------------------------ commands


def cmd_gen(args):
    spec = _load_spec(args.spec)
    obj = build_object(spec, n_points=args.n_points, seed=_seed(args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_obj(out / "mesh.obj", obj.mesh)
    io.write_ply(out / "cloud.ply", obj.cloud)
    io.write_json(out / "gt_params.json", obj.gt_params.to_dict())
    io.write_json(out / "gt_labels.json", obj.gt_labels.tolist())
    io.write_json(out / "spec.json", spec.to_dict())
    _log(args, f"wrote {out}/{{mesh.obj,cloud.ply,gt_params.json,gt_labels.json,spec.json}}")
    _emit(args, {"out": str(out), "n_points": len(obj.cloud), "n_parts": len(spec.parts),
                 "gt_params": obj.gt_params.to_dict()})


def cmd_segment(args):
    cloud = io.read_ply(args.cloud)
    mesh = io.read_obj(args.mesh)
    truth = cloud.labels
    if args.truth:
        truth = np.asarray(io.read_json(args.truth))
    w = SUITE_WEIGHTS if args.weights is None else ClusterWeights(*args.weights)
    params = SegmentParams(weights=w, desired_clusters=args.desired_clusters, cell_size=args.cell_size,
                           target_parts=args.target_parts, initial_clustering=not args.no_initial_clustering,
                           seed=_seed(args.seed))
    t0 = time.perf_counter()
    res = segment_object(cloud, mesh, params)
    wall = time.perf_counter() - t0
    io.write_json(args.out, res.to_dict())
    ply = args.ply or str(Path(args.out).with_suffix(".ply"))
    io.write_ply(ply, cloud, res.point_labels)
    report = {"n_parts": res.n_parts, "n_cells": int(res.complex.n_cells),
              "hull_eval_count": res.hull_eval_count, "wall_time_s": round(wall, 3)}
    if truth is not None:
        if len(truth) != len(cloud):
            raise InputError("ground-truth labels do not match the cloud length")
        pair = SegPair(res.point_labels, truth)
        report.update(use=use_error(pair), gce=gce(pair))
    _log(args, f"segmentation written to {args.out} and {ply}")
    _emit(args, report)


def _parts_from_segmentation(d):
    try:
        labels = np.asarray(d["cell_labels"])
        cents = np.asarray(d["cell_centroids"], float)
        vols = np.asarray(d.get("cell_volumes") or np.ones(len(labels)), float)
        k = int(d["n_parts"])
    except KeyError as exc:
        raise InputError(f"segmentation file lacks {exc}") from exc
    if len(cents) != len(labels):
        raise InputError("cell_centroids and cell_labels differ in length")
    return [cents[labels == i] for i in range(k)], [vols[labels == i] for i in range(k)]


def cmd_identify(args):
    samples = io.read_wrench_csv(args.wrench)
    if args.algo == "ols":
        res = identify_ols(samples)
        if res.rank < 10:
            print(f"warning: OLS data matrix has rank {res.rank} < 10; inertia is not identifiable "
                  "from these samples (minimum-norm solution returned)", file=sys.stderr)
    else:
        if not args.segmentation:
            raise InputError("--algo hps needs a segmentation file")
        poses = io.read_poses(args.poses)
        parts, vols = _parts_from_segmentation(io.read_json(args.segmentation))
        res = identify_hps(samples, parts, poses, vols, threshold=args.threshold)
        if "rank_deficient" in res.solver_status:
            print(f"warning: stop-and-go regressor is {res.solver_status}", file=sys.stderr)
    payload = res.to_dict()
    if args.out:
        io.write_json(args.out, payload)
        _log(args, f"result written to {args.out}")
    _emit(args, payload)


def cmd_simulate(args):
    spec = _load_spec(args.spec)
    if args.params:
        gt = InertialParams.from_dict(io.read_json(args.params))
    else:
        gt = build_object(spec, n_points=16).gt_params
    traj = gen_stop_and_go(args.axes, spec.grasp, dwell=args.dwell, transit=args.transit, sample_rate=args.rate)
    samples = simulate_wrench(gt, traj)
    samples = add_noise(samples, preset_noise(args.noise, _seed(args.seed)))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_wrench_csv(out / "wrench.csv", samples)
    io.write_poses(out / "poses.json", [spec.grasp] * len(samples))
    _log(args, f"wrote {out}/wrench.csv and {out}/poses.json")
    _emit(args, {"n_samples": len(samples), "duration_s": traj.duration, "n_poses": len(traj.poses),
                 "noise": args.noise})


def cmd_benchmark(args):
    cfg_dict = io.read_json(args.config) if args.config else {}
    if args.out:
        cfg_dict["out_dir"] = args.out
    if args.workers:
        cfg_dict["workers"] = args.workers
    if "HPS_SEED" in os.environ:
        cfg_dict["root_seed"] = int(os.environ["HPS_SEED"])
    cfg = BenchmarkConfig.from_dict(cfg_dict)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    prog = None if args.quiet else (lambda i, n: print(f"\r{i}/{n} scenarios", end="", file=sys.stderr))
    rows = run_benchmark(cfg, prog)
    if not args.quiet:
        print(file=sys.stderr)
    (out / "table.csv").write_text(table_csv(rows))
    summary = summarize(rows)
    summary["config"] = cfg.to_dict()
    io.write_json(out / "summary.json", summary)
    failed = sum(1 for r in rows if r.get("error"))
    _log(args, f"{len(rows)} rows ({failed} failed) in {time.perf_counter() - t0:.1f}s -> {out}")
    _emit(args, summary["groups"])


def cmd_metrics(args):
    report = {}
    if args.pred or args.truth:
        if not (args.pred and args.truth):
            raise InputError("--pred and --truth go together")
        pred = io.read_json(args.pred)
        pred = pred["point_labels"] if isinstance(pred, dict) else pred
        pair = SegPair(np.asarray(pred), np.asarray(io.read_json(args.truth)))
        report.update(use=use_error(pair), gce=gce(pair))
    if args.est or args.gt:
        if not (args.est and args.gt):
            raise InputError("--est and --gt go together")
        est = io.read_json(args.est)
        est = InertialParams.from_dict(est.get("params", est))
        gt = InertialParams.from_dict(io.read_json(args.gt))
        if args.extents is None:
            raise InputError("--extents ex ey ez is needed for the size-based errors")
        e = size_errors(est, gt, args.extents)
        report.update(e_m=e["e_m"], e_C=e["e_C"].tolist(), e_J=e["e_J"].tolist(),
                      e_C_mean=e["e_C_mean"], e_J_mean=e["e_J_mean"])
        try:
            report["e_rie"] = riemannian_error(est, gt)
        except HPSError:
            report["e_rie"] = None  # not positive definite
    if not report:
        raise InputError("nothing to evaluate; pass --pred/--truth and/or --est/--gt")
    _emit(args, report)


# ---------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hps", description=__doc__.splitlines()[0])
    ap.add_argument("--quiet", action="store_true", help="only the data payload on stdout")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen", help="mesh, labelled cloud and ground truth for an object")
    p.add_argument("spec", help="built-in name or ObjectSpec JSON")
    p.add_argument("--out", default="gen_out")
    p.add_argument("--n-points", type=int, default=4000)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("segment", help="initial clustering + HTC")
    p.add_argument("cloud")
    p.add_argument("mesh")
    p.add_argument("--target-parts", type=int, default=1)
    p.add_argument("--cell-size", type=float)
    p.add_argument("--desired-clusters", type=int, default=50)
    p.add_argument("--no-initial-clustering", action="store_true")
    p.add_argument("--weights", type=float, nargs=3, metavar=("LP", "LL", "LN"))
    p.add_argument("--truth", help="JSON list of ground-truth point labels (else PLY labels)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="segmentation.json")
    p.add_argument("--ply", help="labelled cloud output (default: next to --out)")
    p.set_defaults(fn=cmd_segment)

    p = sub.add_parser("identify", help="inertial parameters from wrench data")
    p.add_argument("wrench")
    p.add_argument("poses")
    p.add_argument("segmentation", nargs="?")
    p.add_argument("--algo", choices=("hps", "ols"), default="hps")
    p.add_argument("--threshold", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_identify)

    p = sub.add_parser("simulate", help="stop-and-go trajectory, wrench and sensor noise")
    p.add_argument("spec", help="built-in name or ObjectSpec JSON (supplies the grasp)")
    p.add_argument("--params", help="gt_params.json (default: computed from the object spec)")
    p.add_argument("--noise", choices=("none", "low", "moderate", "high"), default="none")
    p.add_argument("--axes", type=int, default=3)
    p.add_argument("--dwell", type=float, default=1.0)
    p.add_argument("--transit", type=float, default=1.5)
    p.add_argument("--rate", type=float, default=100.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="sim_out")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("benchmark", help="object x noise x seed x algorithm matrix")
    p.add_argument("config", nargs="?", help="BenchmarkConfig JSON (defaults if omitted)")
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.set_defaults(fn=cmd_benchmark)

    p = sub.add_parser("metrics", help="segmentation and parameter errors")
    p.add_argument("--pred")
    p.add_argument("--truth")
    p.add_argument("--est")
    p.add_argument("--gt")
    p.add_argument("--extents", type=float, nargs=3)
    p.set_defaults(fn=cmd_metrics)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except NoStalledSamples as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_STALL
    except SEGMENTATION_ERRORS as exc:
        if args.cmd == "segment":
            print(f"segmentation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_SEGMENT
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (HPSError, InputError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
