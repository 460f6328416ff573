"""Print Delta_k(mI, nI) with its decomposition over a range of weights.

    python scripts/delta_table.py --m 1 --n 1 --k 12 16 20 24
"""
import argparse
import time

from siegel_lowlying import petersson


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=1)
    ap.add_argument("--n", type=int, default=1)
    ap.add_argument("--k", type=int, nargs="+", default=[12, 16, 20, 24])
    ap.add_argument("--tol", type=float, default=1e-8)
    ap.add_argument("--budget", type=float, default=3e7)
    args = ap.parse_args()
    eng = petersson.Rank2Engine(args.m, args.n)
    print(f"{'k':>4} {'total':>14} {'diagonal':>9} {'rank1':>12} {'rank2':>12} {'tail':>9} {'radius':>6} {'secs':>7}")
    for k in args.k:
        t0 = time.perf_counter()
        d = petersson.delta_k(args.m, args.n, k, args.tol, engine=eng, budget=args.budget)
        print(f"{k:4d} {d.total:14.10f} {d.diagonal:9.3f} {d.rank1:12.4e} {d.rank2:12.4e} "
              f"{d.tail_bound:9.2e} {d.radius:6d} {time.perf_counter() - t0:7.1f}"
              + ("  (capped)" if d.capped else ""))


if __name__ == "__main__":
    main()
