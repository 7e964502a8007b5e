"""Compare the compiled GF(2) kernel with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 256 512 1024] [--repeat 5] [--json out.json]

Times ``rref`` and ``solve`` on random dense systems (rows = 1.025 * cols,
the shape produced by the Slepian-Wolf decoder) and checks the two backends
return identical results. Reports the best of ``--repeat`` runs.
"""

from __future__ import annotations

import argparse
import json
import timeit

import numpy as np

from macsk import gf2
from macsk._ext import gf2_py

try:
    from macsk._ext import gf2 as gf2_c
except ImportError:  # extension not built
    gf2_c = None


def bench(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512, 1024])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="also write the results here")
    a = ap.parse_args()
    if gf2_c is None:
        print("compiled extension not built; only the fallback is timed")
    backends = {"python": gf2_py} | ({"compiled": gf2_c} if gf2_c else {})
    rng = np.random.default_rng(a.seed)
    rows = []
    print(f"{'op':6} {'cols':>6} " + " ".join(f"{b + ' ms':>12}" for b in backends) + f" {'speedup':>8}")
    for n in a.sizes:
        m = int(n * 1.025)
        mat = rng.integers(0, 2, (m, n), dtype=np.uint8)
        rhs = gf2.matvec(mat, rng.integers(0, 2, n, dtype=np.uint8))
        for op, call in (("rref", lambda impl: gf2.rref(mat, impl=impl)),
                         ("solve", lambda impl: gf2.solve(mat, rhs, impl=impl))):
            outs = {b: call(impl) for b, impl in backends.items()}
            ref = outs["python"]
            for b, o in outs.items():
                same = all(np.array_equal(x, y) for x, y in zip(ref, o) if x is not None)
                if not same:
                    raise SystemExit(f"{op} n={n}: {b} disagrees with the fallback")
            ms = {b: 1e3 * bench(lambda impl=impl: call(impl), a.repeat) for b, impl in backends.items()}
            speed = ms["python"] / ms["compiled"] if "compiled" in ms else float("nan")
            rows.append({"op": op, "cols": n, "rows": m, "ms": ms, "speedup": speed})
            print(f"{op:6} {n:6d} " + " ".join(f"{v:12.2f}" for v in ms.values()) + f" {speed:8.1f}x")
    if a.json:
        with open(a.json, "w") as fh:
            json.dump({"seed": a.seed, "repeat": a.repeat, "results": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
