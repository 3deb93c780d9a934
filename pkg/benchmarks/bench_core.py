"""Compiled core vs pure-Python fallback.

    python3 benchmarks/bench_core.py [--sizes 500 2000 8000] [--repeat 3]

Times the structured triangular solve and the Toeplitz inverse directly,
then an end-to-end relaxation solve with each backend (a subprocess with
ARTIFACT_PURE_PYTHON set runs the fallback).
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from artifact import _core_py

try:
    from artifact import _core
except ImportError:
    _core = None


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(n, m=40, seed=0):
    rng = np.random.default_rng(seed)
    head = np.tril(rng.uniform(0.1, 1.0, (n, m)))
    head[np.arange(m), np.arange(m)] += 1.0
    tail = 1.0 / np.arange(1, n - m + 2) ** 1.5
    tail[0] += 1.0
    rhs = rng.normal(size=n)
    c = 1.0 / np.arange(1, n + 1) ** 0.7
    return head, tail, m, rhs, c


END_TO_END = (
    "import time,json;from artifact import TimeGrid,build_weights,solve_relaxation,Fractional,BACKEND;"
    "w=build_weights(Fractional(0.5),TimeGrid.uniform_to(10.0,{n}));t=time.perf_counter();"
    "[solve_relaxation(w,mu) for mu in (0.5,1.0,2.0)];print(json.dumps([BACKEND,time.perf_counter()-t]))"
)


def end_to_end(n, pure):
    env = dict(os.environ)
    if pure:
        env["ARTIFACT_PURE_PYTHON"] = "1"
    else:
        env.pop("ARTIFACT_PURE_PYTHON", None)
    out = subprocess.run([sys.executable, "-c", END_TO_END.format(n=n)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 2000, 8000])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _core is None:
        print("compiled core not built; only the fallback is available")
    print(f"{'n':>6} {'op':<18} {'python [s]':>11} {'cython [s]':>11} {'speedup':>8}")
    for n in args.sizes:
        head, tail, m, rhs, c = kernel_cases(n)
        for name, call in (
            ("tri_solve", lambda mod: mod.tri_solve(head, tail, m, 0.5, 1.0, rhs)),
            ("toeplitz_inverse", lambda mod: mod.toeplitz_inverse(c)),
        ):
            tp = best_of(lambda: call(_core_py), args.repeat)
            if _core is not None:
                tc = best_of(lambda: call(_core), args.repeat)
                assert np.allclose(call(_core), call(_core_py), rtol=1e-10, atol=1e-12)
                print(f"{n:>6} {name:<18} {tp:>11.4f} {tc:>11.4f} {tp / tc:>8.1f}")
            else:
                print(f"{n:>6} {name:<18} {tp:>11.4f} {'-':>11} {'-':>8}")
        bp, tp = end_to_end(n, pure=True)
        bc, tc = end_to_end(n, pure=False)
        print(f"{n:>6} {'relaxation x3':<18} {tp:>11.4f} {tc:>11.4f} {tp / tc:>8.1f}   ({bp} vs {bc})")


if __name__ == "__main__":
    main()
