"""Command-line interface: ``modalmatrix {generate,cluster,evaluate,bench,density}``.

Exit codes: 0 success, 2 usage or configuration error, 3 I/O failure,
4 numerical degeneracy.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import sys
import time
from pathlib import Path

import numpy as np

from . import _backend
from .datagen import (
    PRESET_NAMES,
    RNG_ALGORITHM,
    SETTINGS,
    GenConfig,
    derive_seed,
    generate,
    preset_prototypes,
)
from .density import EstimatorConfig, choose_k, fit, log_density_many, normal_scale_gradient_bandwidth
from .errors import DegenerateBandwidthError, IsolatedPointError, ModalMatrixError
from .evaluation import confusion_table, fowlkes_mallows, select_k_silhouette
from .meanshift import MeanShiftConfig, cluster, default_threads
from .mvd import load_mvd, read_labels, save_mvd, write_labels
from .tensor_core import Dataset, standardize, unstandardize

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
CSV_HEADER = ["setting", "method", "replicate", "fm", "n_clusters", "status", "seconds"]
METHODS = (
    "fixed",
    "balloon-0.5", "balloon-1", "balloon-5",
    "samplepoint-0.5", "samplepoint-1", "samplepoint-5",
    "kmeans-silhouette",
)
K_AUTO = {"auto0.5": 0.5, "auto1": 1.0, "auto5": 5.0}


class UsageError(ModalMatrixError):
    pass


def _fmt(x) -> str:
    return "%.17g" % x


# ---------------------------------------------------------------- estimators

def _parse_k(value: str, N: int) -> int:
    if value in K_AUTO:
        return choose_k(K_AUTO[value], N)
    try:
        return int(value)
    except ValueError:
        raise UsageError(f"--k must be auto0.5, auto1, auto5 or an integer, got {value!r}") from None


def _parse_h(value: str, data: Dataset) -> float:
    if value == "auto":
        return normal_scale_gradient_bandwidth(data)
    try:
        return float(value)
    except ValueError:
        raise UsageError(f"--h must be 'auto' or a number, got {value!r}") from None


def build_estimator(data: Dataset, estimator: str, h="auto", k=None):
    """EstimatorConfig plus a dict of the bandwidth parameters actually used."""
    if estimator == "fixed":
        hv = _parse_h(h, data)
        return EstimatorConfig.fixed(hv), {"h": hv}
    if estimator == "balloon":
        kv = _parse_k(k or "auto5", len(data))
        return EstimatorConfig.balloon(kv), {"k": kv}
    if estimator == "samplepoint":
        kv = _parse_k(k or "auto1", len(data))
        hv = _parse_h(h, data)
        return EstimatorConfig.sample_point(kv, hv), {"k": kv, "h": hv}
    raise UsageError(f"unknown estimator {estimator!r}")


def _add_estimator_flags(p):
    p.add_argument("--estimator", choices=["fixed", "balloon", "samplepoint"], default="balloon")
    p.add_argument("--h", default="auto", help="bandwidth: 'auto' (normal-scale gradient rule) or a number")
    p.add_argument("--k", default=None, help="neighbours: auto0.5, auto1, auto5 or an integer")
    p.add_argument("--standardize", action="store_true", help="z-score every matrix entry first")


def _threads(args) -> int:
    return args.threads if args.threads is not None else default_threads()


# ---------------------------------------------------------------- generate

def _gen_config(args) -> GenConfig:
    if args.config:
        cp = configparser.ConfigParser()
        with open(args.config, encoding="utf-8") as fh:
            cp.read_string("[generate]\n" + fh.read())
        for key, value in cp["generate"].items():
            attr = key.replace("-", "_")
            if not hasattr(args, attr):
                raise UsageError(f"unknown config key {key!r}")
            if getattr(args, attr) is None:
                setattr(args, attr, value)
    if args.prototypes:
        names = [s.strip() for s in str(args.prototypes).split(",") if s.strip()]
        weights = ([float(w) for w in str(args.weights).split(",")] if args.weights
                   else [1.0 / len(names)] * len(names))
    else:
        names, weights = SETTINGS[args.preset or "two-balanced"]
        if args.weights:
            weights = [float(w) for w in str(args.weights).split(",")]
    def opt(value, default, cast):
        return cast(value) if value is not None else default

    P, T = opt(args.p, 5, int), opt(args.t, 5, int)
    return GenConfig(
        prototypes=tuple(preset_prototypes(n, P, T) for n in names),
        weights=tuple(weights),
        rho=opt(args.rho, 1.0, float),
        sigma=opt(args.sigma, 1.0, float),
        N=opt(args.n, 200, int),
        seed=opt(args.seed, 0, int),
    )


def cmd_generate(args, out=sys.stdout) -> int:
    cfg = _gen_config(args)
    data, labels = generate(cfg)
    meta = {
        "rng": RNG_ALGORITHM,
        "seed": cfg.seed,
        "prototypes": " ".join(p.name for p in cfg.prototypes),
        "weights": " ".join(_fmt(w) for w in cfg.weights),
        "rho": _fmt(cfg.rho),
        "sigma": _fmt(cfg.sigma),
    }
    save_mvd(args.output, data, labels, meta)
    P, T = data.shape
    counts = np.bincount(labels, minlength=len(cfg.prototypes))
    print(f"N={len(data)} P={P} T={T}", file=out)
    print("counts=" + ",".join(str(int(c)) for c in counts), file=out)
    return EXIT_OK


# ---------------------------------------------------------------- cluster

def run_cluster(data: Dataset, estimator, h="auto", k=None, do_standardize=False,
                ms_cfg=MeanShiftConfig(), threads=1):
    work, center, scale = (standardize(data) if do_standardize else (data, None, None))
    est_cfg, params = build_estimator(work, estimator, h, k)
    t0 = time.perf_counter()
    result = cluster(work, est_cfg, ms_cfg, threads=threads)
    elapsed = time.perf_counter() - t0
    modes = result.modes
    if do_standardize:
        modes = unstandardize(modes, center, scale)
    return result, modes, est_cfg, params, elapsed


def cmd_cluster(args, out=sys.stdout) -> int:
    data, _, _ = load_mvd(args.input)
    ms_cfg = MeanShiftConfig(args.tol, args.max_iter, args.merge_factor)
    threads = _threads(args)
    result, modes, est_cfg, params, elapsed = run_cluster(
        data, args.estimator, args.h, args.k, args.standardize, ms_cfg, threads)
    prefix = args.out or str(Path(args.input).with_suffix(""))
    write_labels(prefix + ".labels", result.labels)
    save_mvd(prefix + ".modes.mvd", modes,
             meta={"mode_log_density": " ".join(_fmt(v) for v in result.mode_log_density)})
    N = len(data)
    P, T = data.shape
    report = {
        "estimator": args.estimator,
        "kernel": est_cfg.kernel_family,
        "N": N, "P": P, "T": T,
        **{key: (_fmt(v) if isinstance(v, float) else v) for key, v in params.items()},
        "standardize": int(bool(args.standardize)),
        "M": result.n_clusters,
        "cluster_sizes": ",".join(str(int(s)) for s in result.sizes()),
        "bandwidth_scale": _fmt(result.bandwidth_scale),
        "merge_radius": _fmt(result.merge_radius),
        "converged": f"{int(result.converged.sum())}/{N}",
        "mean_iterations": "%.3f" % result.iterations.mean(),
        "backend": _backend.NAME,
        "threads": threads,
        "wall_time": "%.6f" % elapsed,
    }
    text = "".join(f"{key}={v}\n" for key, v in report.items())
    with open(prefix + ".report", "w", encoding="utf-8") as fh:
        fh.write(text)
    out.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- evaluate

def format_table(table, rows, cols) -> str:
    head = [""] + [str(c) for c in cols]
    body = [[str(r)] + [str(int(v)) for v in line] for r, line in zip(rows, table)]
    width = max(len(s) for line in [head] + body for s in line)
    return "\n".join(" ".join(s.rjust(width) for s in line) for line in [head] + body)


def cmd_evaluate(args, out=sys.stdout) -> int:
    a = read_labels(args.labels_a)
    b = read_labels(args.labels_b)
    if a.shape != b.shape:
        raise UsageError(f"label files differ in length: {a.size} vs {b.size}")
    print("FM=%.6f" % fowlkes_mallows(a, b), file=out)
    print(format_table(*confusion_table(a, b)), file=out)
    return EXIT_OK


# ---------------------------------------------------------------- density

def cmd_density(args, out=sys.stdout) -> int:
    data, _, _ = load_mvd(args.input)
    queries, _, _ = load_mvd(args.query)
    if queries.shape != data.shape:
        raise UsageError(f"query shape {queries.shape} does not match data shape {data.shape}")
    if args.standardize:
        data, center, scale = standardize(data)
        queries = Dataset((queries.values - center) / scale)
    est_cfg, _ = build_estimator(data, args.estimator, args.h, args.k)
    values = log_density_many(fit(est_cfg, data), queries)
    out.write("".join(_fmt(v) + "\n" for v in values))
    return EXIT_OK


# ---------------------------------------------------------------- bench

def parse_bench_spec(text: str):
    """Settings from an INI-style spec; one section per setting.

    Keys: ``setting`` (named preset) or ``prototypes``/``weights``; ``n``,
    ``p``, ``t``, ``rho``, ``sigma``, ``replicates``, ``methods``, ``seed``,
    ``kmin``, ``kmax``, ``restarts``. ``[DEFAULT]`` values apply to all.
    """
    cp = configparser.ConfigParser()
    cp.read_string(text)
    settings = []
    for name in cp.sections():
        sec = cp[name]
        preset = sec.get("setting", name)
        if "prototypes" in sec:
            protos = [s.strip() for s in sec["prototypes"].split(",")]
            weights = ([float(w) for w in sec["weights"].split(",")] if "weights" in sec
                       else [1.0 / len(protos)] * len(protos))
        elif preset in SETTINGS:
            protos, weights = (list(x) for x in SETTINGS[preset])
        else:
            raise UsageError(f"setting {name!r}: unknown preset {preset!r} and no prototypes given")
        for p in protos:
            if p not in PRESET_NAMES:
                raise UsageError(f"setting {name!r}: unknown prototype {p!r}")
        methods = [m.strip() for m in sec.get("methods", ",".join(METHODS)).split(",") if m.strip()]
        for m in methods:
            if m not in METHODS:
                raise UsageError(f"setting {name!r}: unknown method {m!r}")
        s = {
            "name": name,
            "prototypes": protos,
            "weights": weights,
            "n": sec.getint("n", 200),
            "p": sec.getint("p", 5),
            "t": sec.getint("t", 5),
            "rho": sec.getfloat("rho", 1.0),
            "sigma": sec.getfloat("sigma", 1.0),
            "replicates": sec.getint("replicates", 20),
            "methods": methods,
            "seed": sec.getint("seed", 0),
            "kmin": sec.getint("kmin", 2),
            "kmax": sec.getint("kmax", 9),
            "restarts": sec.getint("restarts", 10),
        }
        if s["replicates"] < 1:
            raise UsageError(f"setting {name!r}: replicates must be >= 1")
        settings.append(s)
    if not settings:
        raise UsageError("bench spec defines no settings")
    return settings


def run_method(method: str, data: Dataset, seed: int, setting: dict, threads: int = 1):
    """``(labels, n_clusters)`` for one bench method on one dataset."""
    if method == "kmeans-silhouette":
        kmax = min(setting["kmax"], len(data) - 1)
        K, labels = select_k_silhouette(data, setting["kmin"], kmax, seed=seed,
                                        restarts=setting["restarts"])
        return labels, K
    if method == "fixed":
        est, _ = build_estimator(data, "fixed")
    else:
        family, c = method.split("-")
        est, _ = build_estimator(data, family, k=f"auto{c}")
    result = cluster(data, est, MeanShiftConfig(), threads=threads)
    return result.labels, result.n_clusters


def run_bench(settings, threads: int = 1, progress=None):
    """Yield one CSV row dict per (setting, replicate, method) cell."""
    for s in settings:
        protos = tuple(preset_prototypes(n, s["p"], s["t"]) for n in s["prototypes"])
        for rep in range(s["replicates"]):
            rep_seed = derive_seed(s["seed"], rep)
            cfg = GenConfig(protos, tuple(s["weights"]), s["rho"], s["sigma"], s["n"], rep_seed)
            data, truth = generate(cfg)
            for method in s["methods"]:
                t0 = time.perf_counter()
                try:
                    labels, m = run_method(method, data, derive_seed(rep_seed, 1), s, threads)
                    fm, status = fowlkes_mallows(truth, labels), "ok"
                except (ModalMatrixError, np.linalg.LinAlgError) as exc:
                    fm, m, status = float("nan"), 0, f"error:{type(exc).__name__}"
                row = {
                    "setting": s["name"], "method": method, "replicate": rep,
                    "fm": "%.6f" % fm, "n_clusters": m, "status": status,
                    "seconds": "%.3f" % (time.perf_counter() - t0),
                }
                if progress:
                    progress(row)
                yield row


def summarize(rows):
    """Median and quartiles of FM per (setting, method), over successful cells."""
    groups = {}
    for r in rows:
        groups.setdefault((r["setting"], r["method"]), []).append(r)
    out = []
    for (setting, method), rs in groups.items():
        fm = np.array([float(r["fm"]) for r in rs if r["status"] == "ok"])
        nc = np.array([int(r["n_clusters"]) for r in rs if r["status"] == "ok"])
        if fm.size:
            q1, med, q3 = np.percentile(fm, [25, 50, 75])
            mc = float(np.median(nc))
        else:
            q1 = med = q3 = mc = float("nan")
        out.append({
            "setting": setting, "method": method, "n_ok": int(fm.size), "n_total": len(rs),
            "median_fm": "%.6f" % med, "q1_fm": "%.6f" % q1, "q3_fm": "%.6f" % q3,
            "iqr_fm": "%.6f" % (q3 - q1), "median_clusters": "%.1f" % mc,
        })
    return out


def _write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if path == "-":
        sys.stdout.write(buf.getvalue())
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())


def cmd_bench(args, out=sys.stdout) -> int:
    with open(args.spec, encoding="utf-8") as fh:
        settings = parse_bench_spec(fh.read())
    progress = (lambda r: print(",".join(str(r[c]) for c in CSV_HEADER), file=sys.stderr)) if args.verbose else None
    rows = list(run_bench(settings, threads=_threads(args), progress=progress))
    _write_csv(args.output, CSV_HEADER, rows)
    summary = summarize(rows)
    header = list(summary[0].keys())
    summary_path = args.summary or (None if args.output == "-" else str(Path(args.output).with_suffix("")) + ".summary.csv")
    if summary_path:
        _write_csv(summary_path, header, summary)
    for s in summary:
        print(f"{s['setting']:>16} {s['method']:>18}  median FM={s['median_fm']}  "
              f"IQR=[{s['q1_fm']}, {s['q3_fm']}]  clusters~{s['median_clusters']}", file=out)
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modalmatrix", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="draw a synthetic dataset from DCT prototypes")
    g.add_argument("--config", help="key=value file with any of the flags below")
    g.add_argument("--preset", choices=sorted(SETTINGS))
    g.add_argument("--prototypes", help="comma-separated prototype names (A, B, C)")
    g.add_argument("--weights", help="comma-separated mixing weights")
    g.add_argument("--n", type=int)
    g.add_argument("--p", type=int)
    g.add_argument("--t", type=int)
    g.add_argument("--rho", type=float)
    g.add_argument("--sigma", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("cluster", help="modal clustering by mean-shift")
    c.add_argument("input")
    _add_estimator_flags(c)
    c.add_argument("--tol", type=float, default=1e-7)
    c.add_argument("--max-iter", type=int, default=500)
    c.add_argument("--merge-factor", type=float, default=0.5)
    c.add_argument("--threads", type=int, default=None)
    c.add_argument("--out", help="output prefix (default: input path without suffix)")
    c.set_defaults(func=cmd_cluster)

    e = sub.add_parser("evaluate", help="Fowlkes-Mallows index and contingency table")
    e.add_argument("labels_a")
    e.add_argument("labels_b")
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("bench", help="Monte Carlo grid of settings x methods")
    b.add_argument("spec")
    b.add_argument("-o", "--output", default="-", help="CSV path ('-' for stdout)")
    b.add_argument("--summary", help="summary CSV path (default: <output>.summary.csv)")
    b.add_argument("--threads", type=int, default=None)
    b.add_argument("-v", "--verbose", action="store_true")
    b.set_defaults(func=cmd_bench)

    d = sub.add_parser("density", help="log-density of query matrices")
    d.add_argument("input")
    d.add_argument("query")
    _add_estimator_flags(d)
    d.set_defaults(func=cmd_density)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out=out)
    except (DegenerateBandwidthError, IsolatedPointError) as exc:
        idx = getattr(exc, "indices", ())
        print(f"error: {exc}" + (f" (indices: {list(idx)})" if idx else ""), file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ModalMatrixError, ValueError, configparser.Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
