"""Time the compiled kernels against the pure-Python fallback.

Run ``python3 benchmarks/bench_kernels.py``; ``--repeat`` sets the number
of timing repetitions (the best is reported).
"""

import argparse
import timeit

import numpy as np

from repairable import _kernels_py

try:
    from repairable import _kernels
except ImportError:
    _kernels = None


def cases(rng):
    x = rng.exponential(size=20_000)
    d = rng.uniform(size=20_000)
    e = rng.exponential(size=20_000)
    m = rng.exponential(size=3_000)
    return {
        "virtual_ages (n=20000, kijima2)": lambda k: k.virtual_ages(x, d, 3, 0.0),
        "simulate_va_weibull (n=20000)": lambda k: k.simulate_va_weibull(e, d, 2, 0.0, 2.0, 1.0, 1.0, 1.0, 1e12, 0.0, 0.0),
        "mann_count (n=3000)": lambda k: k.mann_count(m),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; nothing to compare")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':36s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speed-up':>9s}")
    for name, fn in cases(rng).items():
        slow = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat))
        fast = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat))
        print(f"{name:36s} {1e3 * slow:12.2f} {1e3 * fast:12.3f} {slow / fast:8.0f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
