"""Compiled vs pure-Python kernel timings.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both backends are imported side by side; results are checked for bit
equality before timing.
"""

import argparse
import timeit

import numpy as np

from relmargin import _backend

VARIANTS = [("static", 0, False), ("adaptive", 1, False), ("adaptive+in-batch", 1, True),
            ("distributed", 2, True)]


def _inputs(B, D, seed=0):
    rng = np.random.default_rng(seed)
    return tuple(np.ascontiguousarray(rng.standard_normal((B, D))) for _ in range(3))


def _best(fn, repeat):
    number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-7)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if "cython" not in _backend.available():
        raise SystemExit("compiled backend not built; run `pip install -e . --no-build-isolation`")
    cy, py = _backend.get("cython"), _backend.get("python")

    print(f"{'kernel':<28}{'B':>5}{'D':>5}{'cython ms':>12}{'python ms':>12}{'speedup':>9}")
    for B, D in ((8, 32), (64, 32), (64, 768)):
        Q, P, N = _inputs(B, D)
        for name, code, in_batch in VARIANTS:
            a = cy.loss_grad(code, in_batch, 1.0, Q, P, N, True)
            b = py.loss_grad(code, in_batch, 1.0, Q, P, N, True)
            assert a[0] == b[0], f"{name}: totals differ between backends"
            t_cy = _best(lambda: cy.loss_grad(code, in_batch, 1.0, Q, P, N, True), args.repeat)
            t_py = _best(lambda: py.loss_grad(code, in_batch, 1.0, Q, P, N, True), args.repeat)
            print(f"{'loss_grad ' + name:<28}{B:>5}{D:>5}{t_cy * 1e3:>12.3f}{t_py * 1e3:>12.3f}"
                  f"{t_py / t_cy:>9.1f}")
        Dm = np.ascontiguousarray(np.random.default_rng(1).standard_normal((256, D)))
        t_cy = _best(lambda: cy.pairwise_cosine(Q, Dm), args.repeat)
        t_py = _best(lambda: py.pairwise_cosine(Q, Dm), args.repeat)
        print(f"{'pairwise_cosine x256':<28}{B:>5}{D:>5}{t_cy * 1e3:>12.3f}{t_py * 1e3:>12.3f}"
              f"{t_py / t_cy:>9.1f}")


if __name__ == "__main__":
    main()
