"""Time the numba kernels against the pure-numpy fallback.

The backend is fixed at import time by EVIDENTIA_KERNELS, so the driver
re-executes itself once per backend in a subprocess and merges the
timings into one table. Run from the repository root:

    python3 benchmarks/kernel_bench.py
    python3 benchmarks/kernel_bench.py --repeats 50 --sides 380 768
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

WARMUP = 2


def time_call(fn, repeats):
    best = float("inf")
    for _ in range(WARMUP):
        fn()
    for _ in range(repeats):
        started = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - started)
    return best


def run_backend(repeats, sides):
    from evidentia import kernels

    rng = np.random.default_rng(1234)
    rows = []
    for side in sides:
        img = rng.uniform(0.0, 1.0, (side, side))
        rows.append({
            "workload": f"laplacian_4n {side}x{side}",
            "seconds": time_call(lambda: kernels.laplacian_4n(img), repeats),
        })
        values = rng.uniform(0.0, 1.0, side * side)
        bins = rng.integers(0, 21, side * side)  # 20 bands + discard bucket
        rows.append({
            "workload": f"band_sums {side * side} cells / 20 bins",
            "seconds": time_call(lambda: kernels.band_sums(values, bins, 20), repeats),
        })
    return {"backend": kernels.backend_name(), "rows": rows}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--sides", type=int, nargs="+", default=[190, 380, 1024])
    parser.add_argument("--backend", choices=["numba", "numpy"],
                        help=argparse.SUPPRESS)  # subprocess mode
    args = parser.parse_args()

    if args.backend:
        report = run_backend(args.repeats, args.sides)
        if report["backend"] != args.backend:
            print(f"requested backend {args.backend} unavailable, got "
                  f"{report['backend']}", file=sys.stderr)
            return 1
        print(json.dumps(report))
        return 0

    reports = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, EVIDENTIA_KERNELS=backend)
        proc = subprocess.run(
            [sys.executable, __file__, "--backend", backend,
             "--repeats", str(args.repeats),
             "--sides", *map(str, args.sides)],
            capture_output=True, text=True, env=env,
        )
        if proc.returncode != 0:
            print(proc.stderr.strip(), file=sys.stderr)
            return proc.returncode
        reports[backend] = json.loads(proc.stdout)

    width = max(len(r["workload"]) for r in reports["numpy"]["rows"])
    print(f"{'workload':<{width}}  {'numba':>10}  {'numpy':>10}  {'speedup':>8}")
    for fast, slow in zip(reports["numba"]["rows"], reports["numpy"]["rows"]):
        assert fast["workload"] == slow["workload"]
        ratio = slow["seconds"] / fast["seconds"]
        print(f"{fast['workload']:<{width}}  {fast['seconds'] * 1e3:>8.3f}ms"
              f"  {slow['seconds'] * 1e3:>8.3f}ms  {ratio:>7.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
