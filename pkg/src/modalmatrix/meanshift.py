"""Mean-shift ascent on matrix kernel density estimates and mode clustering."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _backend
from .density import (
    Balloon,
    EstimatorConfig,
    FittedEstimator,
    Fixed,
    SamplePoint,
    Separable,
    balloon_radius_sq,
    fit,
    log_density_at,
)
from .errors import DegenerateBandwidthError, DimensionError, IsolatedPointError, ParameterError
from .tensor_core import Dataset, as_matrix, knn_radii, squared_distances


@dataclass(frozen=True)
class MeanShiftConfig:
    tol: float = 1e-7
    max_iter: int = 500
    merge_radius_factor: float = 0.5

    def __post_init__(self):
        if not self.tol > 0:
            raise ParameterError(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ParameterError(f"max_iter must be a positive integer, got {self.max_iter}")
        if not self.merge_radius_factor > 0:
            raise ParameterError(f"merge_radius_factor must be positive, got {self.merge_radius_factor}")


@dataclass(frozen=True, eq=False)
class ClusterResult:
    """Output of :func:`cluster`.

    ``modes`` has shape ``(M, P, T)``; ``terminals`` holds the end point of
    every ascent before merging.
    """

    labels: np.ndarray
    modes: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    mode_log_density: np.ndarray
    terminals: np.ndarray
    bandwidth_scale: float
    merge_radius: float

    @property
    def n_clusters(self) -> int:
        return self.modes.shape[0]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_clusters)


def _uses_knn_path(est: FittedEstimator) -> bool:
    return isinstance(est.variant, Balloon) and est.kernel.family == "uniform"


def _check_gaussian(est: FittedEstimator):
    if isinstance(est.variant, Balloon):
        if est.kernel.family != "uniform":
            raise ParameterError("balloon mean-shift is only defined for the uniform ball kernel")
    elif est.kernel.family != "gaussian":
        raise ParameterError("mean-shift for fixed, separable and sample-point estimators needs the gaussian kernel")


def ms_step(est: FittedEstimator, Y) -> np.ndarray:
    """One mean-shift update ``Y -> Y + M(Y)`` for the fitted estimator."""
    _check_gaussian(est)
    Y = as_matrix(Y, est.data.shape)
    if _uses_knn_path(est):
        # ball form: average every sample point inside the k-NN radius of Y
        flat = est.data.flat
        sq = squared_distances(Y.ravel(), flat)
        inside = np.flatnonzero(sq <= balloon_radius_sq(est, sq))
        return (np.cumsum(flat[inside], axis=0)[-1] / inside.size).reshape(Y.shape)
    flat, log_coef, inv_bw2 = est.gaussian_weights()
    y = est.whiten(Y).ravel() if isinstance(est.variant, Separable) else Y.ravel()
    y_new, status = _backend.core.gauss_step(flat, np.ascontiguousarray(y), log_coef, inv_bw2)
    if status:
        raise IsolatedPointError("mean-shift weights have no finite mass")
    y_new = np.asarray(y_new).reshape(Y.shape)
    if isinstance(est.variant, Separable):
        y_new = est.unwhiten(y_new)
    return y_new


def ms_step_knn_uniform(data: Dataset, k: int, Y) -> np.ndarray:
    """Mean of the ``k`` nearest sample points to ``Y`` (ties to lower index)."""
    data = data if isinstance(data, Dataset) else Dataset(data)
    if not 1 <= k <= len(data):
        raise ParameterError(f"k={k} must lie in [1, {len(data)}]")
    Y = as_matrix(Y, data.shape)
    out = _backend.core.knn_step(data.flat, np.ascontiguousarray(Y.ravel()), int(k))
    return np.asarray(out).reshape(Y.shape)


def ascend(step, Y0, cfg: MeanShiftConfig = MeanShiftConfig()):
    """Iterate ``step`` from ``Y0``.

    Stops once ``|Y_new - Y|_F < tol * (1 + |Y|_F)`` or after ``max_iter``
    steps. Returns ``(mode, iterations, converged)``.
    """
    Y = as_matrix(Y0)
    for it in range(1, cfg.max_iter + 1):
        Y_new = np.asarray(step(Y), dtype=np.float64)
        done = np.linalg.norm(Y_new - Y) < cfg.tol * (1.0 + np.linalg.norm(Y))
        Y = Y_new
        if done:
            return Y, it, True
    return Y, cfg.max_iter, False


def _roots(parent, idx):
    r = parent[idx]
    while True:
        up = parent[r]
        if np.array_equal(up, r):
            return r
        r = up


def merge_modes(modes, radius: float, log_density=None, block: int = 512):
    """Single-linkage grouping of points closer than ``radius``.

    Parameters
    ----------
    modes : array_like, shape (M, ...)
        Terminal points; trailing axes are flattened.
    radius : float
        Link threshold on the Frobenius distance (inclusive).
    log_density : array_like, optional
        Score per mode; each component is represented by its highest-scoring
        member, ties to the lower index. Without scores the first member wins.

    Returns
    -------
    representatives : ndarray of int
        Index into ``modes`` of each component's representative, components
        ordered by their first member.
    assignment : ndarray of int
        Component number of every input mode.
    """
    if not radius > 0:
        raise ParameterError(f"merge radius must be positive, got {radius}")
    flat = np.ascontiguousarray(np.asarray(modes, dtype=np.float64).reshape(len(modes), -1))
    M = flat.shape[0]
    # every root is the smallest index of its component
    parent = np.arange(M)
    r2 = radius * radius
    for start in range(0, M, block):
        stop = min(start + block, M)
        close = _backend.core.pairwise_sq(flat[start:stop], flat) <= r2
        for a in range(stop - start):
            i = start + a
            js = np.flatnonzero(close[a, i + 1:])
            if js.size == 0:
                continue
            rs = _roots(parent, np.append(js + i + 1, i))
            parent[rs] = rs.min()
    roots = _roots(parent, np.arange(M))
    _, first, assignment = np.unique(roots, return_index=True, return_inverse=True)
    assignment = assignment.astype(np.int64)
    if log_density is None:
        return first.astype(np.int64), assignment
    scores = np.asarray(log_density, dtype=float)
    # per component: highest score first, then lowest index
    order = np.lexsort((np.arange(M), -scores, assignment))
    head = np.r_[True, assignment[order][1:] != assignment[order][:-1]]
    return order[head].astype(np.int64), assignment


def default_threads() -> int:
    env = os.environ.get("MODALMATRIX_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ParameterError(f"MODALMATRIX_THREADS must be an integer, got {env!r}") from None
    return 1


def _run_batched(fn, starts, threads):
    m = starts.shape[0]
    if threads <= 1 or m < 2:
        return fn(starts)
    chunks = np.array_split(np.arange(m), min(threads * 4, m))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda idx: fn(np.ascontiguousarray(starts[idx])), chunks))
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(4))


def _mode_log_density(est, Y):
    try:
        return log_density_at(est, Y)
    except DegenerateBandwidthError:
        # at least k coincident points: the balloon density is unbounded
        return np.inf


def cluster(data, est_config: EstimatorConfig, cfg: MeanShiftConfig = MeanShiftConfig(),
            threads: int | None = None) -> ClusterResult:
    """Run an ascent from every observation and group shared end points.

    Terminals are merged within ``merge_radius_factor`` times the global
    bandwidth scale (``h`` for fixed and sample-point, the mean k-NN radius
    for balloon, 1 in whitened units for separable). Results do not depend on
    ``threads``.
    """
    data = data if isinstance(data, Dataset) else Dataset(data)
    est = fit(est_config, data)
    _check_gaussian(est)
    threads = default_threads() if threads is None else max(1, int(threads))
    core = _backend.core
    v = est.variant
    P, T = data.shape

    if _uses_knn_path(est):
        def run(s):
            return core.knn_ascend_many(data.flat, s, int(v.k), float(cfg.tol), int(cfg.max_iter))
        terminals, iters, conv, status = _run_batched(run, np.ascontiguousarray(data.flat), threads)
        scale = float(knn_radii(data, v.k, exclude_self=False).mean())
        merge_space = terminals
    else:
        flat, log_coef, inv_bw2 = est.gaussian_weights()

        def run(s):
            return core.gauss_ascend_many(flat, s, log_coef, inv_bw2, float(cfg.tol), int(cfg.max_iter))
        terminals, iters, conv, status = _run_batched(run, np.ascontiguousarray(flat), threads)
        if np.any(status):
            bad = np.flatnonzero(status).tolist()
            raise IsolatedPointError(f"mean-shift weights vanished for starts {bad}")
        merge_space = terminals
        if isinstance(v, Separable):
            terminals = np.stack([est.unwhiten(z.reshape(P, T)).ravel() for z in terminals])
            scale = 1.0
        else:
            scale = float(v.h)

    if scale <= 0:
        raise DegenerateBandwidthError("bandwidth scale for mode merging is zero")
    radius = cfg.merge_radius_factor * scale
    term_mats = terminals.reshape(-1, P, T)
    logd = np.array([_mode_log_density(est, Y) for Y in term_mats])
    reps, assignment = merge_modes(merge_space, radius, logd)
    return ClusterResult(
        labels=assignment,
        modes=term_mats[reps].copy(),
        iterations=np.asarray(iters, dtype=np.int64),
        converged=np.asarray(conv, dtype=bool),
        mode_log_density=logd[reps],
        terminals=term_mats,
        bandwidth_scale=scale,
        merge_radius=radius,
    )
