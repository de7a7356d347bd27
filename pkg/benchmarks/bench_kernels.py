"""Time the compiled kernels against their pure-Python twins.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]

Each kernel runs on identical inputs through both backends; outputs are
checked for agreement before timings are reported.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from cpi._kernels import _fallback

try:
    from cpi._kernels import _core
except ImportError:
    _core = None


def _best(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def lasso_case(n: int, p: int):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((n, p))
    x = np.asfortranarray((x - x.mean(0)) / x.std(0, ddof=1))
    y = x[:, :5] @ np.ones(5) + rng.standard_normal(n)
    y = y - y.mean()
    col_sq = np.einsum("ij,ij->j", x, x) / n
    lam = 0.05 * float(np.max(np.abs(x.T @ y)) / n)

    def run(k):
        beta = np.zeros(p)
        resid = y.copy()
        k.lasso_cd(x, resid, beta, col_sq, lam, 1e-12, 100_000)
        return beta
    return run


def tree_case(n: int, p: int):
    rng = np.random.default_rng(1)
    x = np.asfortranarray(rng.standard_normal((n, p)))
    y = np.sin(x[:, 0]) + x[:, 1] ** 2 + 0.1 * rng.standard_normal(n)
    sample = rng.integers(0, n, n).astype(np.int64)

    def run(k):
        return k.build_tree(x, y, sample, max(p // 3, 1), 5, -1, 12345)
    return run


def forest_predict_case(n: int, p: int, trees: int):
    rng = np.random.default_rng(2)
    x = np.asfortranarray(rng.standard_normal((n, p)))
    y = x[:, 0] - x[:, 1] + 0.1 * rng.standard_normal(n)
    parts = [_fallback.build_tree(x, y, rng.integers(0, n, n).astype(np.int64), 2, 5, -1, t)
             for t in range(trees)]
    offsets = np.cumsum([0] + [len(pt[0]) for pt in parts[:-1]])
    feat = np.concatenate([pt[0] for pt in parts])
    thr = np.concatenate([pt[1] for pt in parts])
    left = np.concatenate([np.where(pt[2] >= 0, pt[2] + o, -1) for pt, o in zip(parts, offsets)])
    right = np.concatenate([np.where(pt[3] >= 0, pt[3] + o, -1) for pt, o in zip(parts, offsets)])
    val = np.concatenate([pt[4] for pt in parts])
    roots = offsets.astype(np.int64)
    xc = np.ascontiguousarray(x)

    def run(k):
        return k.predict_forest(xc, feat, thr, left, right, val, roots, False)
    return run


def signflip_case(n: int, draws: int):
    d = np.random.default_rng(3).standard_normal(n)

    def run(k):
        return k.signflip_subset_sums(d, draws, 987654321)
    return run


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(u, v) for u, v in zip(a, b))
    return bool(np.allclose(a, b, rtol=1e-9, atol=1e-9))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = ap.parse_args(argv)
    if _core is None:
        print("compiled extension not built; nothing to compare")
        return 1
    s = 4 if args.quick else 1
    cases = [
        (f"lasso_cd        n={400 // s} p={200 // s}", lasso_case(400 // s, 200 // s)),
        (f"build_tree      n={2000 // s} p=10", tree_case(2000 // s, 10)),
        (f"predict_forest  n={2000 // s} trees={50 // s}", forest_predict_case(2000 // s, 5, 50 // s)),
        (f"signflip_sums   n=100 draws={20000 // s}", signflip_case(100, 20000 // s)),
    ]
    print(f"{'kernel':<36}{'compiled':>12}{'python':>12}{'speedup':>10}  match")
    for name, run in cases:
        same = _same(run(_core), run(_fallback))
        tc = _best(lambda: run(_core), args.repeat)
        tp = _best(lambda: run(_fallback), max(1, args.repeat // 2))
        print(f"{name:<36}{tc * 1e3:>10.2f}ms{tp * 1e3:>10.2f}ms{tp / tc:>9.1f}x  {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
