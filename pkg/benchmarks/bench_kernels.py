"""Time the direct-summation kernels on both backends.

    python3 benchmarks/bench_kernels.py [--sizes 1024,4096,16384] [--repeat 3]

Each size M is a square cloud of M points; ``pair_sum`` evaluates the
Beurling kernel at M targets from M sources, ``difference_sums`` does the
full M x M Besov double sum.  The first numba call is timed separately
(it includes compilation or cache loading).
"""

import argparse
import time
import timeit

import numpy as np

from qcreg import kernels
from qcreg.transforms import beurling_kernel


def cloud(M, rng):
    n = int(round(np.sqrt(M)))
    x = (np.arange(n) + 0.5) / n - 0.5
    z = (x[:, None] + 1j * x[None, :]).ravel()
    return z, rng.normal(size=z.size) + 1j * rng.normal(size=z.size)


def bench(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1024,4096,16384")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(0)
    n_modes, c_modes = beurling_kernel().arrays
    backends = ["numpy"] + (["numba"] if kernels.HAVE_NUMBA else [])

    if "numba" in backends:
        z, v = cloud(16, rng)
        t0 = time.perf_counter()
        kernels.pair_sum(z, z, v, n_modes, c_modes, backend="numba")
        kernels.difference_sums(z, v, 2.0, 3.0, backend="numba")
        print(f"numba first call (compile or cache load): {time.perf_counter() - t0:.2f} s")

    print(f"{'kernel':<16}{'M':>8}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}  max|diff|")
    for M in sizes:
        z, v = cloud(M, rng)
        for name, call in (
            ("pair_sum", lambda b: kernels.pair_sum(z, z, v, n_modes, c_modes, backend=b)),
            ("difference_sums", lambda b: kernels.difference_sums(z, v, 2.0, 3.0, backend=b)),
        ):
            times = {b: bench(lambda b=b: call(b), args.repeat) for b in backends}
            outs = [call(b) for b in backends]
            diff = np.abs(outs[0] - outs[-1]).max() / max(np.abs(outs[0]).max(), 1e-300)
            speed = times["numpy"] / times[backends[-1]]
            print(f"{name:<16}{M:>8}" + "".join(f"{times[b]:>11.3f}s" for b in backends)
                  + f"{speed:>9.1f}x  {diff:.1e}")


if __name__ == "__main__":
    main()
