"""Compare the compiled and pure-Python LCS kernels on synthetic line edits.

    python3 benchmarks/bench_lcs.py --sizes 200 1000 3000 --repeat 3
"""

from __future__ import annotations

import argparse
import random
import sys
import timeit

from anchorgate.frontend import lcs


def edited_pair(n: int, churn: float, rng: random.Random) -> tuple[list[int], list[int]]:
    """A program of ``n`` line ids and a version with ``churn`` of its lines replaced or moved."""
    a = [rng.randrange(n // 2 + 1) for _ in range(n)]
    b = list(a)
    for _ in range(int(n * churn)):
        i = rng.randrange(len(b))
        if rng.random() < 0.5:
            b[i] = rng.randrange(n * 2)
        else:
            b.insert(rng.randrange(len(b) + 1), b.pop(i))
    return a, b


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[200, 1000, 3000])
    parser.add_argument("--churn", type=float, default=0.2)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)

    if lcs.lcs_length_ext is None:
        print("compiled kernel not built (or ANCHORGATE_PURE=1); timing the pure kernel only")
    rng = random.Random(args.seed)
    print(f"{'lines':>6}  {'python s':>9}  {'cython s':>9}  {'speedup':>8}")
    for n in args.sizes:
        a, b = edited_pair(n, args.churn, rng)
        t_py = min(timeit.repeat(lambda: lcs.lcs_length_py(a, b), number=1, repeat=args.repeat))
        if lcs.lcs_length_ext is None:
            print(f"{n:>6}  {t_py:>9.4f}  {'-':>9}  {'-':>8}")
            continue
        if lcs.lcs_length_ext(a, b) != lcs.lcs_length_py(a, b):
            print(f"kernels disagree at n={n}", file=sys.stderr)
            return 1
        t_ext = min(timeit.repeat(lambda: lcs.lcs_length_ext(a, b), number=1, repeat=args.repeat))
        print(f"{n:>6}  {t_py:>9.4f}  {t_ext:>9.4f}  {t_py / t_ext:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
