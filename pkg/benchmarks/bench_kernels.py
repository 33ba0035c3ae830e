"""Compare the compiled fixpoint kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N] [--case NAME ...]

Transition tables are built once per case; only the fixpoint and the
action-mask pass are timed.  Both backends must agree bit for bit.
"""
import argparse
import math
import time

import numpy as np

from gridshield import _kernels_py, models, synthesis as syn, transform as T
from gridshield.grid import GridSpec

try:
    from gridshield import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def cases():
    ball = models.bouncing_ball()
    sat = models.satellite()
    yield "ball_T_650", ball, T.energy_transform(), (25, 26), 8
    yield "ball_S_65k", ball, T.identity_transform(ball.lower, ball.upper), (260, 250), 2
    yield "satellite_T_27k", sat, T.polar_transform(), (91, 300), 4
    yield "satellite_S_176k", sat, T.identity_transform(sat.lower, sat.upper), (420, 420), 2


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--case", action="append", help="run only these cases")
    args = ap.parse_args()
    if _kernels_c is None:
        print("compiled extension not built; only the numpy fallback is available")

    print(f"{'case':<18} {'cells':>8} {'edges':>9} {'sweeps':>6} "
          f"{'numpy fix':>10} {'cython fix':>10} {'speedup':>8} {'numpy mask':>10} {'cython mask':>11}")
    for name, model, tr, counts, per_axis in cases():
        if args.case and name not in args.case:
            continue
        grid = GridSpec(tr.t_lower, tr.t_upper, counts)
        tt = syn.compute_transitions(model, tr, grid, syn.SamplingConfig(per_axis=per_axis))
        init = syn.initial_safe(grid, tr, model.safety, tt.has_preimage).astype(np.uint8)
        arrays = tt.arrays()

        t_py, (safe_py, sweeps) = best_of(lambda: _kernels_py.fixpoint_sweeps(*arrays, init), args.repeat)
        m_py, masks_py = best_of(lambda: _kernels_py.action_masks(*arrays, safe_py), args.repeat)
        row = f"{name:<18} {grid.size:>8} {len(tt.indices):>9} {sweeps:>6} {t_py:>10.4f}"
        if _kernels_c is not None:
            t_c, (safe_c, sweeps_c) = best_of(lambda: _kernels_c.fixpoint_sweeps(*arrays, init), args.repeat)
            m_c, masks_c = best_of(lambda: _kernels_c.action_masks(*arrays, safe_c), args.repeat)
            assert sweeps_c == sweeps and np.array_equal(safe_c, safe_py), name
            assert np.array_equal(masks_c, masks_py), name
            speed = t_py / t_c if t_c > 0 else math.inf
            row += f" {t_c:>10.4f} {speed:>7.1f}x {m_py:>10.4f} {m_c:>11.4f}"
        else:
            row += f" {'-':>10} {'-':>8} {m_py:>10.4f} {'-':>11}"
        print(row)


if __name__ == "__main__":
    main()
