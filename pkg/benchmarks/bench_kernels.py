#!/usr/bin/env python3
"""Compare the compiled and pure-python kernel backends.

Times the two hot kernels (Faddeeva evaluation, panel moment sums) on
workload shapes matching real searches, then an end-to-end locate() on the
plasma dispersion function with each backend forced.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np


def _best_of(repeats, fn, *args):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(repeats):
    from meroloc import _kernels_py

    backends = [("pure-python", _kernels_py)]
    try:
        from meroloc import _kernels

        backends.append(("compiled", _kernels))
    except ImportError:
        print("compiled extension not available; benchmarking fallback only")

    rng = np.random.RandomState(0)

    # Faddeeva: a large batch (vectorized sweep) and many small batches
    # (the adaptive trace's refinement rounds)
    big = rng.uniform(-10, 10, 200_000) + 1j * rng.uniform(-8, 8, 200_000)
    small_batches = [rng.uniform(-10, 10, 60) + 1j * rng.uniform(-8, 8, 60)
                     for _ in range(2000)]

    # panel sums: 400 panels x 15 nodes x 35 moment orders
    zeta = rng.uniform(-1, 1, (400, 15)) + 1j * rng.uniform(-1, 1, (400, 15))
    lnf = rng.uniform(-3, 3, (400, 15)) + 1j * rng.uniform(-9, 9, (400, 15))

    print(f"{'kernel / workload':44s}" + "".join(f"{n:>14s}" for n, _ in backends))
    rows = [
        ("faddeeva_w, 1 x 200k points",
         lambda mod: mod.faddeeva_w(big)),
        ("faddeeva_w, 2000 x 60 points",
         lambda mod: [mod.faddeeva_w(b) for b in small_batches]),
        ("panel_moment_sums, 400x15 nodes, kmax=35",
         lambda mod: mod.panel_moment_sums(zeta, lnf, 35)),
    ]
    times = {}
    for label, work in rows:
        cells = []
        for name, mod in backends:
            t = _best_of(repeats, work, mod)
            times[(label, name)] = t
            cells.append(f"{t * 1e3:11.2f} ms")
        print(f"{label:44s}" + "".join(f"{c:>14s}" for c in cells))
    if len(backends) == 2:
        print()
        for label, _ in rows:
            ratio = times[(label, "pure-python")] / times[(label, "compiled")]
            print(f"{label:44s} speedup x{ratio:.2f}")
    return backends


def bench_end_to_end(repeats):
    import subprocess
    import sys

    code = (
        "import time\n"
        "from meroloc import make_plasma_z, rect_from_corners, SearchConfig, locate\n"
        "import meroloc\n"
        "t0 = time.perf_counter()\n"
        "reports = locate(make_plasma_z(), rect_from_corners(0 - 5j, 5.5 + 0j),"
        " SearchConfig())\n"
        "print(f'{meroloc.KERNEL_BACKEND}: {len(reports)} roots in "
        "{time.perf_counter() - t0:.3f}s')\n"
    )
    print("\nend-to-end locate (plasma dispersion zeros, Table-3 region):")
    for env_val in ("0", "1"):
        best = None
        for _ in range(repeats):
            proc = subprocess.run(
                [sys.executable, "-c", code],
                capture_output=True, text=True,
                env={"MEROLOC_PURE_PYTHON": env_val, "PATH": "/usr/bin:/bin"},
            )
            line = proc.stdout.strip()
            if proc.returncode != 0:
                print(proc.stderr)
                return
            t = float(line.rsplit(" ", 1)[-1].rstrip("s"))
            if best is None or t < best[0]:
                best = (t, line)
        print("  " + best[1])


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    bench_kernels(args.repeats)
    bench_end_to_end(args.repeats)


if __name__ == "__main__":
    main()
