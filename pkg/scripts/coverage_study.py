"""Coverage of the exact and fast intervals on the Dirichlet example.

    python scripts/coverage_study.py --meta 200 --N 128 --n 128 --seed 1
"""

import argparse
import time

from lowprev import (
    ConstrainedSimplex,
    GambleSpec,
    Problem,
    confidence_interval_exact,
    confidence_interval_fast,
    derive_seed,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--meta", type=int, default=200)
    ap.add_argument("--N", type=int, default=128)
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--level", type=float, default=0.95)
    ap.add_argument("--sampling", choices=["tstar", "uniform"], default="tstar")
    args = ap.parse_args()

    q_t = (0.1, 0.1, 0.1, 0.1, 0.6) if args.sampling == "tstar" else (0.2,) * 5
    problem = Problem(2.0, ConstrainedSimplex.uniform(5, 0.1), GambleSpec.linear((1, 2, 5, 4, -3)), q_t)
    hits = {"exact": 0, "fast": 0}
    empty = 0
    start = time.perf_counter()
    for m in range(args.meta):
        master = derive_seed(args.seed, m, "diagnostic")
        e = confidence_interval_exact(master, args.N, args.n, problem, level=args.level)
        f = confidence_interval_fast(master, args.N, args.n, problem, level=args.level)
        hits["exact"] += e.contains(-0.6)
        hits["fast"] += f.contains(-0.6)
        empty += f.empty
    elapsed = time.perf_counter() - start
    for name, h in hits.items():
        print(f"{name}: coverage {h}/{args.meta} = {h / args.meta:.3f}")
    print(f"fast intervals flagged empty: {empty}; {elapsed:.0f}s")


if __name__ == "__main__":
    main()
