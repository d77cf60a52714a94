"""Partition agreement metrics and the K-means / silhouette comparator.

Matrices are clustered through their row-major flattening: Frobenius distance
on P x T matrices is Euclidean distance on the flattened vectors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import DimensionError, ParameterError, UndefinedMetricError
from .tensor_core import Dataset


def _as_labels(a) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 1:
        raise DimensionError(f"labels must be 1-d, got shape {a.shape}")
    return a


def confusion_table(a, b):
    """Contingency counts; rows follow sorted labels of ``a``, columns of ``b``.

    Returns ``(table, row_labels, col_labels)``.
    """
    a, b = _as_labels(a), _as_labels(b)
    if a.shape != b.shape:
        raise DimensionError(f"label lengths differ: {a.size} vs {b.size}")
    ra, ia = np.unique(a, return_inverse=True)
    rb, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ra.size, rb.size), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table, ra, rb


def _pairs(n):
    n = np.asarray(n, dtype=np.int64)
    return int(np.sum(n * (n - 1) // 2))


def fowlkes_mallows(a, b) -> float:
    """Geometric mean of pair precision and pair recall; 0 when no pair is shared."""
    a, b = _as_labels(a), _as_labels(b)
    if a.shape != b.shape:
        raise DimensionError(f"label lengths differ: {a.size} vs {b.size}")
    if a.size < 2:
        raise ParameterError("Fowlkes-Mallows needs at least 2 observations")
    table, _, _ = confusion_table(a, b)
    tp = _pairs(table)
    if tp == 0:
        return 0.0
    return tp / math.sqrt(_pairs(table.sum(axis=1)) * _pairs(table.sum(axis=0)))


def _flat(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.flat
    X = np.asarray(data, dtype=np.float64)
    return np.ascontiguousarray(X.reshape(X.shape[0], -1))


def _restart_rng(seed, restart):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(restart),))))


def _sq_to_centers(X, C):
    diff = X[:, None, :] - C[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _plusplus(X, K, rng):
    N = X.shape[0]
    centers = [int(rng.integers(N))]
    d2 = np.einsum("ij,ij->i", X - X[centers[0]], X - X[centers[0]])
    for _ in range(1, K):
        total = d2.sum()
        if total > 0:
            nxt = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            nxt = min(nxt, N - 1)
        else:
            free = np.setdiff1d(np.arange(N), centers)
            nxt = int(free[rng.integers(free.size)])
        centers.append(nxt)
        diff = X - X[nxt]
        d2 = np.minimum(d2, np.einsum("ij,ij->i", diff, diff))
    return X[centers].copy()


def _repair_empty(labels, d2, K):
    counts = np.bincount(labels, minlength=K)
    for j in np.flatnonzero(counts == 0):
        own = d2[np.arange(labels.size), labels]
        own[counts[labels] <= 1] = -1.0
        far = int(np.argmax(own))
        counts[labels[far]] -= 1
        labels[far] = j
        counts[j] = 1
    return labels


@dataclass(frozen=True, eq=False)
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    objective: float
    history: tuple
    n_iter: int


def lloyd(X, K: int, rng, max_iter: int = 300) -> KMeansResult:
    """One k-means++ seeded Lloyd run on flattened data."""
    C = _plusplus(X, K, rng)
    labels = None
    history = []
    for it in range(1, max_iter + 1):
        d2 = _sq_to_centers(X, C)
        new = _repair_empty(np.argmin(d2, axis=1), d2, K)
        history.append(float(d2[np.arange(X.shape[0]), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        C = np.stack([X[labels == j].mean(axis=0) for j in range(K)])
    d2 = _sq_to_centers(X, C)
    obj = float(d2[np.arange(X.shape[0]), labels].sum())
    return KMeansResult(labels, C, obj, tuple(history), it)


def kmeans_fit(data, K: int, seed=0, restarts: int = 10, max_iter: int = 300) -> KMeansResult:
    X = _flat(data)
    N = X.shape[0]
    if not 2 <= K <= N:
        raise ParameterError(f"K={K} must lie in [2, {N}]")
    if restarts < 1:
        raise ParameterError("restarts must be >= 1")
    best = None
    for r in range(restarts):
        res = lloyd(X, K, _restart_rng(seed, r), max_iter)
        if best is None or res.objective < best.objective:
            best = res
    return best


def kmeans(data, K: int, seed=0, restarts: int = 10) -> np.ndarray:
    """Best-of-``restarts`` Lloyd partition under Frobenius distance."""
    return kmeans_fit(data, K, seed, restarts).labels


def silhouette_samples(data, labels, block: int = 512) -> np.ndarray:
    X = _flat(data)
    labels = _as_labels(labels)
    N = X.shape[0]
    if labels.shape != (N,):
        raise DimensionError(f"expected {N} labels, got {labels.shape}")
    uniq, inv = np.unique(labels, return_inverse=True)
    if uniq.size < 2:
        raise UndefinedMetricError("silhouette needs at least two clusters")
    if N < 3:
        raise ParameterError("silhouette needs at least 3 observations")
    K = uniq.size
    counts = np.bincount(inv, minlength=K).astype(float)
    onehot = np.zeros((N, K))
    onehot[np.arange(N), inv] = 1.0
    out = np.zeros(N)
    for start in range(0, N, block):
        stop = min(start + block, N)
        D = np.sqrt(_backend.core.pairwise_sq(X[start:stop], X))
        sums = D @ onehot
        own = inv[start:stop]
        rows = np.arange(stop - start)
        own_n = counts[own]
        a = np.where(own_n > 1, sums[rows, own] / np.maximum(own_n - 1, 1), 0.0)
        means = sums / counts
        means[rows, own] = np.inf
        b = means.min(axis=1)
        s = (b - a) / np.maximum(a, b)
        out[start:stop] = np.where(own_n > 1, s, 0.0)
    return out


def silhouette(data, labels) -> float:
    """Mean silhouette width under Frobenius distance; singletons score 0."""
    return float(silhouette_samples(data, labels).mean())


def select_k_silhouette(data, kmin: int = 2, kmax: int = 9, seed=0, restarts: int = 10):
    """K-means for each ``K`` in ``[kmin, kmax]``; keep the best silhouette.

    Ties go to the smaller ``K``. Returns ``(K, labels)``.
    """
    N = _flat(data).shape[0]
    if not 2 <= kmin <= kmax <= N - 1:
        raise ParameterError(f"need 2 <= kmin <= kmax <= N - 1, got {kmin}, {kmax}, N={N}")
    best = None
    for K in range(kmin, kmax + 1):
        labels = kmeans(data, K, seed=_k_seed(seed, K), restarts=restarts)
        score = silhouette(data, labels)
        if best is None or score > best[0]:
            best = (score, K, labels)
    return best[1], best[2]


def _k_seed(seed, K):
    return int(np.random.SeedSequence(int(seed), spawn_key=(1000 + K,)).generate_state(1, dtype=np.uint64)[0])
