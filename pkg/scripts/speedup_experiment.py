"""Hull evaluations and wall time of HTC with and without the initial point clustering.

    python scripts/speedup_experiment.py --cell-sizes 0.006 0.005 0.0045
"""
import argparse
import time

from hps.metrics import SegPair, use_error
from hps.segment import SegmentParams, segment_object
from hps.synth import build_object, builtin_specs


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--object", default="dumbbell3")
    ap.add_argument("--cell-sizes", type=float, nargs="+", default=[0.006, 0.005, 0.0045])
    ap.add_argument("--parts", type=int, default=3)
    ap.add_argument("--n-points", type=int, default=4000)
    a = ap.parse_args()

    obj = build_object(builtin_specs()[a.object], n_points=a.n_points, seed=0)
    print(f"{'cell':>7s} {'cells':>6s} {'init':>5s} {'hulls':>7s} {'time s':>7s} {'USE':>6s}")
    for cs in a.cell_sizes:
        for ic in (True, False):
            t0 = time.perf_counter()
            seg = segment_object(obj.cloud, obj.mesh, SegmentParams(cell_size=cs, target_parts=a.parts,
                                                                    initial_clustering=ic))
            dt = time.perf_counter() - t0
            u = use_error(SegPair(seg.point_labels, obj.gt_labels))
            print(f"{cs:7.4f} {seg.complex.n_cells:6d} {str(ic):>5s} {seg.hull_eval_count:7d} {dt:7.2f} {u:6.3f}")


if __name__ == "__main__":
    main()
