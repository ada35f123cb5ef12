"""Time the numba and pure-numpy backends on the hot kernels.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]

Each case is run once per backend to warm up (and compile), then timed.
The two backends must agree; the script prints the speed-up and the
largest absolute difference per case.
"""

import argparse
import time

import numpy as np

from subplanck import _accel, core, fockoracle, hypercube


def _time(fn, repeat):
    fn()
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(quick):
    n_grid = 128 if quick else 384
    out = []
    for n, mu, nbar in ((2, 6.0, 0.0), (3, 2.0, 0.5), (4, 8.0, 0.0)):
        st = hypercube.build_state(hypercube.KrausSpec(n, mu, nbar=nbar))
        gs = core.GridSpec.square(core.default_grid(st).x_max, n_grid)
        out.append((f"terms n={n} mu={mu:g} nbar={nbar:g}",
                    lambda st=st, gs=gs: core.evaluate_grid(st, gs, method="terms").values))
    st = hypercube.build_state(hypercube.KrausSpec(3, 1e-6))
    gs = core.GridSpec.square(core.default_grid(st).x_max, n_grid)
    out.append(("chain n=3 mu=1e-6", lambda: core.evaluate_grid(st, gs, method="chain").values))
    spec = hypercube.KrausSpec(2, 3.0)
    rho = fockoracle.fock_build(spec)
    gs2 = core.GridSpec.square(6.0, 48 if quick else 96)
    out.append((f"fock N={rho.cutoff}", lambda: fockoracle.fock_wigner(rho, gs2).values))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="small grids (smoke run)")
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    print(f"{'case':34s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speed-up':>9s} {'max |diff|':>11s}")
    try:
        for name, fn in cases(args.quick):
            _accel.set_backend("numba")
            t_nb, a = _time(fn, args.repeat)
            _accel.set_backend("numpy")
            t_np, b = _time(fn, args.repeat)
            diff = float(np.abs(a - b).max())
            print(f"{name:34s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:9.1f} {diff:11.2e}")
    finally:
        _accel.set_backend(None)


if __name__ == "__main__":
    main()
