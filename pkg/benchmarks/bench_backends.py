"""Time the compiled core against the numpy fallback on full clustering runs.

    python3 benchmarks/bench_backends.py [--repeats 3] [--threads 1] [--quick]

Each workload is clustered once per backend and repeat; the table reports the
median wall time, the speedup and whether both backends gave the same labels.
"""
import argparse
import statistics
import time

import numpy as np

from modalmatrix import _backend
from modalmatrix.datagen import setting_config, generate
from modalmatrix.density import EstimatorConfig, choose_k, normal_scale_gradient_bandwidth
from modalmatrix.meanshift import cluster

WORKLOADS = [
    # (name, setting, N, P, T, estimator)
    ("fixed     N=200  5x5", "two-balanced", 200, 5, 5, "fixed"),
    ("balloon   N=200  5x5", "two-balanced", 200, 5, 5, "balloon"),
    ("samplept  N=200  5x5", "two-balanced", 200, 5, 5, "samplepoint"),
    ("fixed     N=1000 5x5", "two-balanced", 1000, 5, 5, "fixed"),
    ("balloon   N=1000 5x5", "two-balanced", 1000, 5, 5, "balloon"),
    ("balloon   N=450 15x50", "two-balanced", 450, 15, 50, "balloon"),
]


def _estimator(data, kind):
    N = len(data)
    if kind == "fixed":
        return EstimatorConfig.fixed(normal_scale_gradient_bandwidth(data))
    if kind == "balloon":
        return EstimatorConfig.balloon(choose_k("five", N))
    return EstimatorConfig.sample_point(choose_k("one", N), normal_scale_gradient_bandwidth(data))


def _time(core, data, est, threads, repeats):
    saved = _backend.core
    _backend.core = core
    try:
        times, labels = [], None
        for _ in range(repeats):
            t0 = time.perf_counter()
            res = cluster(data, est, threads=threads)
            times.append(time.perf_counter() - t0)
            labels = res.labels
        return statistics.median(times), labels
    finally:
        _backend.core = saved


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--quick", action="store_true", help="skip the N=1000 and 15x50 workloads")
    args = ap.parse_args(argv)

    compiled = _backend.compiled_core
    if compiled is None:
        print("compiled core not built; only the fallback is available")
    print(f"{'workload':<22} {'python [s]':>11} {'cython [s]':>11} {'speedup':>8}  labels")
    for name, setting, N, P, T, kind in WORKLOADS:
        if args.quick and (N > 200 or P * T > 25):
            continue
        data, _ = generate(setting_config(setting, P, T, N=N, seed=1))
        est = _estimator(data, kind)
        t_py, lab_py = _time(_backend.python_core, data, est, args.threads, args.repeats)
        if compiled is None:
            print(f"{name:<22} {t_py:>11.3f} {'-':>11} {'-':>8}")
            continue
        t_cy, lab_cy = _time(compiled, data, est, args.threads, args.repeats)
        same = "same" if np.array_equal(lab_py, lab_cy) else "DIFFER"
        print(f"{name:<22} {t_py:>11.3f} {t_cy:>11.3f} {t_py / t_cy:>7.1f}x  {same}")


if __name__ == "__main__":
    main()
