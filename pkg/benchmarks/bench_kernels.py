"""Time the stencil kernels on both backends.

    python benchmarks/bench_kernels.py [--L 40] [--h 0.1] [--repeat 5]

Numba timings exclude the first (compiling) call.  The two backends must agree
to rounding before anything is timed.
"""

import argparse
import timeit

import numpy as np

from chiral_skyrmion import _accel, kernels
from chiral_skyrmion.dynamics import rhs_moving_frame
from chiral_skyrmion.energy import ModelParams
from chiral_skyrmion.families import perturbed_skyrmion
from chiral_skyrmion.grid_field import make_grid


def cases(f, params):
    g = f.grid
    m = f.values
    new = m.copy()
    heff = kernels.effective_field(m, g.h, params.eps, params.p)
    return {
        "gradient": lambda: kernels.gradient(m, g.h),
        "effective_field": lambda: kernels.effective_field(m, g.h, params.eps, params.p),
        "projected_step": lambda: kernels.projected_step(m, heff, 0.2 * g.h ** 2, g.weights),
        "relax_step": lambda: kernels.relax_step(m, new, g.h, params.eps, params.p, 0.2 * g.h ** 2, g.weights),
        "solid_angles": lambda: kernels.solid_angles(m),
        "rhs_moving_frame": lambda: rhs_moving_frame(f, params, 0.5, 1.0),
    }


def _parts(out):
    return [np.asarray(x, dtype=float) for x in (out if isinstance(out, tuple) else (out,))]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=float, default=40.0)
    ap.add_argument("--h", type=float, default=0.1)
    ap.add_argument("--repeat", type=int, default=5)
    a = ap.parse_args(argv)
    if not _accel.NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")

    f = perturbed_skyrmion(make_grid(a.L, a.h), 0.4)
    params = ModelParams(4, 0.05)
    print(f"grid n={f.grid.n} ({f.grid.n ** 2} nodes), best of {a.repeat}")
    print(f"{'kernel':<18} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'max diff':>10}")
    saved = _accel.get_backend()
    try:
        for name in cases(f, params):
            times, outs = {}, {}
            for backend in ("numpy", "numba"):
                _accel.set_backend(backend)
                fn = cases(f, params)[name]
                outs[backend] = fn()  # warm-up, compiles on numba
                times[backend] = min(timeit.repeat(fn, number=1, repeat=a.repeat)) * 1e3
            diff = max(float(np.max(np.abs(x - y))) for x, y in zip(_parts(outs["numpy"]), _parts(outs["numba"])))
            print(f"{name:<18} {times['numpy']:10.2f} {times['numba']:10.2f} "
                  f"{times['numpy'] / times['numba']:8.1f} {diff:10.1e}")
    finally:
        _accel.set_backend(saved)


if __name__ == "__main__":
    main()
