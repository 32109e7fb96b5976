"""Time the compiled kernels against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 1000 10000 100000] [--repeat 5]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from driftgate import kernels


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n: int, rng: np.random.Generator) -> dict:
    s = np.round(rng.random(n), 4)
    y = (rng.random(n) < 0.1).astype(np.int8)
    order = np.argsort(-s, kind="stable")
    desc, yd = np.ascontiguousarray(s[order]), np.ascontiguousarray(y[order])
    asc, ya = np.ascontiguousarray(desc[::-1]), np.ascontiguousarray(yd[::-1])
    x = rng.random(48)
    starts = rng.integers(0, 44, size=(max(n // 10, 1), 10), dtype=np.int64)
    return {
        "sweep_threshold": lambda m: m.sweep_threshold(desc, yd, 10.0, 1.0),
        "roc_auc_sorted": lambda m: m.roc_auc_sorted(asc, ya),
        "average_precision_sorted": lambda m: m.average_precision_sorted(desc, yd),
        "block_means": lambda m: m.block_means(x, starts, 5),
    }


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1_000, 10_000, 100_000])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    rng = np.random.default_rng(0)
    print(f"selected backend: {kernels.BACKEND}")
    names = list(backends)
    print(f"{'kernel':<26}{'n':>9}" + "".join(f"{b + ' ms':>14}" for b in names) + f"{'speedup':>10}")
    for n in args.sizes:
        for name, call in cases(n, rng).items():
            ms = {b: 1e3 * best_of(lambda: call(mod), args.repeat) for b, mod in backends.items()}
            speed = ms["python"] / ms["cython"] if "cython" in ms else float("nan")
            print(f"{name:<26}{n:>9}" + "".join(f"{ms[b]:>14.3f}" for b in names) + f"{speed:>10.1f}")


if __name__ == "__main__":
    main()
