"""Compare the numba and pure-numpy kernels.

Run with ``python3 benchmarks/bench_kernels.py``.  Each kernel is called once
to trigger compilation before timing.
"""

import argparse
import timeit

import numpy as np

from covdec import _accel


def bench(fn, *args, repeat=5):
    fn(*args)
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _accel.HAS_NUMBA:
        print("numba unavailable; only the numpy path can run")
        return
    print(f"{'kernel':<28}{'numpy [s]':>12}{'numba [s]':>12}{'max diff':>12}")
    for n in (2, 3, 4, 5):
        t_np = bench(_accel.twirl_weights_numpy, n, 8, repeat=args.repeat)
        t_nb = bench(_accel.twirl_weights_numba, n, 8, repeat=args.repeat)
        diff = np.abs(_accel.twirl_weights_numpy(n, 8) - _accel.twirl_weights_numba(n, 8)).max()
        print(f"{f'twirl weights n={n}':<28}{t_np:>12.4f}{t_nb:>12.4f}{diff:>12.1e}")
    rng = np.random.default_rng(0)
    for n, steps in ((2, 5000), (3, 2000), (4, 1000)):
        N = n * n
        L = 0.1 * (rng.normal(size=(1, N, N)) + 1j * rng.normal(size=(1, N, N)))
        t_np = bench(_accel.rk4_propagate_numpy, L, 1e-3, steps, repeat=args.repeat)
        t_nb = bench(_accel.rk4_propagate_numba, L, 1e-3, steps, repeat=args.repeat)
        diff = np.abs(_accel.rk4_propagate_numpy(L, 1e-3, steps) - _accel.rk4_propagate_numba(L, 1e-3, steps)).max()
        print(f"{f'rk4 n={n} steps={steps}':<28}{t_np:>12.4f}{t_nb:>12.4f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
