"""Compiled vs numpy double-sum kernels.

    python benchmarks/bench_kernels.py [--keys 16] [--repeat 3]

Both backends are imported directly, so the RDVERIFY_KERNELS switch does not matter here.
Outputs are compared before timing.
"""

import argparse
import time

import numpy as np

from rdverify import _pykernels
from rdverify.characters import enumerate_characters

try:
    from rdverify import _ckernels
except ImportError:  # extension not built
    _ckernels = None

MODULI = (95, 247, 381, 1861, 3315)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--keys", type=int, default=16, help="(a, n) keys per f1_histograms call")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation` first")
        return
    rng = np.random.default_rng(args.seed)
    print(f"{'q':>6} {'N':>5} {'keys':>5} {'cython s':>10} {'numpy s':>10} {'speedup':>8}")
    for q in MODULI:
        chi = enumerate_characters(q, odd=True, primitive=True, complex=True)[0]
        a_keys = rng.integers(0, q, args.keys, dtype=np.int64)
        n_keys = rng.integers(0, q, args.keys, dtype=np.int64)
        ref = _pykernels.f1_histograms(chi.exps, q, chi.order, a_keys, n_keys)
        got = _ckernels.f1_histograms(chi.exps, q, chi.order, a_keys, n_keys)
        if not np.array_equal(ref, got):
            raise SystemExit(f"backends disagree at q={q}")
        tc = best_of(lambda: _ckernels.f1_histograms(chi.exps, q, chi.order, a_keys, n_keys), args.repeat)
        tp = best_of(lambda: _pykernels.f1_histograms(chi.exps, q, chi.order, a_keys, n_keys), args.repeat)
        print(f"{q:>6} {chi.order:>5} {args.keys:>5} {tc:>10.4f} {tp:>10.4f} {tp / tc:>8.1f}x")


if __name__ == "__main__":
    main()
