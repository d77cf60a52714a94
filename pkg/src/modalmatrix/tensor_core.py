"""Matrix observations, Frobenius geometry and exact nearest-neighbour search.

A matrix observation is a 2-d ``float64`` numpy array of shape ``(P, T)``.
A :class:`Dataset` stores ``N`` of them as a read-only ``(N, P, T)`` array.
Squared Frobenius distances are always accumulated as sums of squared
differences (never via the ``|a|^2 + |b|^2 - 2ab`` expansion), so results are
translation invariant up to rounding and neighbour ranks are stable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError


def as_matrix(obj, shape=None) -> np.ndarray:
    """Coerce ``obj`` to a finite 2-d float64 array (scalars become 1x1)."""
    arr = np.asarray(obj, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"expected a P x T matrix, got shape {np.shape(obj)}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError("matrix entries must be finite")
    if shape is not None and arr.shape != tuple(shape):
        raise DimensionError(f"shape {arr.shape} does not match {tuple(shape)}")
    return arr


class Dataset:
    """Immutable ordered collection of ``N`` matrices sharing one shape.

    Parameters
    ----------
    obs : array_like
        Either an ``(N, P, T)`` array or a sequence of ``(P, T)`` matrices.
        A 1-d sequence of scalars is read as ``N`` observations of shape 1x1.
    """

    __slots__ = ("_values", "_flat")

    def __init__(self, obs):
        if isinstance(obs, Dataset):
            values = obs._values
        else:
            values = np.asarray(obs, dtype=np.float64)
            if values.ndim == 1:
                values = values.reshape(-1, 1, 1)
            elif values.ndim == 2:
                raise DimensionError(
                    "ambiguous 2-d array; pass (N, P, T) or use Dataset.from_flat"
                )
            if values.ndim != 3:
                raise DimensionError(f"expected (N, P, T) data, got shape {values.shape}")
            if values.shape[0] < 1 or values.shape[1] < 1 or values.shape[2] < 1:
                raise DimensionError(f"empty dataset shape {values.shape}")
            if not np.all(np.isfinite(values)):
                raise ParameterError("dataset entries must be finite")
            values = np.ascontiguousarray(values).copy()
            values.setflags(write=False)
        self._values = values
        flat = values.reshape(values.shape[0], -1)
        flat.setflags(write=False)
        self._flat = flat

    @classmethod
    def from_flat(cls, flat, P: int, T: int) -> Dataset:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.ndim != 2 or flat.shape[1] != P * T:
            raise DimensionError(f"flat data of shape {flat.shape} is not N x {P * T}")
        return cls(flat.reshape(-1, P, T))

    @property
    def values(self) -> np.ndarray:
        """Read-only ``(N, P, T)`` view."""
        return self._values

    @property
    def flat(self) -> np.ndarray:
        """Read-only ``(N, P*T)`` row-major view."""
        return self._flat

    @property
    def shape(self) -> tuple[int, int]:
        return self._values.shape[1], self._values.shape[2]

    @property
    def dim(self) -> int:
        return self._flat.shape[1]

    def __len__(self) -> int:
        return self._values.shape[0]

    def __getitem__(self, i) -> np.ndarray:
        return self._values[i]

    def __iter__(self):
        return iter(self._values)

    def __repr__(self) -> str:
        P, T = self.shape
        return f"Dataset(N={len(self)}, P={P}, T={T})"


@dataclass(frozen=True)
class NeighborList:
    indices: np.ndarray
    distances: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)


def frobenius_distance(A, B) -> float:
    A = as_matrix(A)
    B = as_matrix(B)
    if A.shape != B.shape:
        raise DimensionError(f"shape mismatch {A.shape} vs {B.shape}")
    diff = A - B
    return float(np.sqrt(np.sum(diff * diff)))


def squared_distances(y_flat: np.ndarray, flat: np.ndarray) -> np.ndarray:
    """Squared Frobenius distances from one flattened point to every row."""
    diff = flat - y_flat
    return np.einsum("ij,ij->i", diff, diff)


def smallest_k(sq: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` smallest values, ordered by (value, index)."""
    n = sq.shape[0]
    if k < n:
        cand = np.argpartition(sq, k - 1)[:k]
        kth = sq[cand].max()
        # rebuild the candidate set so ties at the k-th value go to low indices
        below = np.flatnonzero(sq < kth)
        at = np.flatnonzero(sq == kth)[: k - below.size]
        cand = np.concatenate([below, at])
    else:
        cand = np.arange(n)
    order = np.lexsort((cand, sq[cand]))
    return cand[order]


def _check_query(Y, data: Dataset, k: int, exclude_index):
    Y = as_matrix(Y)
    if Y.shape != data.shape:
        raise DimensionError(f"query shape {Y.shape} does not match data shape {data.shape}")
    n_avail = len(data) - (exclude_index is not None)
    if exclude_index is not None and not 0 <= exclude_index < len(data):
        raise ParameterError(f"exclude_index {exclude_index} out of range")
    if not 1 <= k <= n_avail:
        raise ParameterError(f"k={k} must lie in [1, {n_avail}]")
    return Y


def knn_query(Y, data: Dataset, k: int, exclude_index: int | None = None) -> NeighborList:
    """Exact ``k`` nearest neighbours of ``Y`` in ``data``.

    Ties are broken by the lower dataset index. Ranking is done on squared
    distances; the returned distances are their square roots.
    """
    Y = _check_query(Y, data, k, exclude_index)
    sq = squared_distances(Y.ravel(), data.flat)
    if exclude_index is not None:
        sq[exclude_index] = np.inf
    idx = smallest_k(sq, k)
    return NeighborList(indices=idx, distances=np.sqrt(sq[idx]))


def knn_distance(Y, data: Dataset, k: int, exclude_index: int | None = None) -> float:
    """Distance from ``Y`` to its ``k``-th nearest neighbour (may be 0)."""
    return float(knn_query(Y, data, k, exclude_index).distances[-1])


def knn_radii(data: Dataset, k: int, exclude_self: bool = True, block: int = 256) -> np.ndarray:
    """``delta_k(X_n)`` for every observation, computed in row blocks."""
    N = len(data)
    n_avail = N - 1 if exclude_self else N
    if not 1 <= k <= n_avail:
        raise ParameterError(f"k={k} must lie in [1, {n_avail}]")
    from . import _backend

    flat = data.flat
    out = np.empty(N)
    for start in range(0, N, block):
        stop = min(start + block, N)
        sq = _backend.core.pairwise_sq(flat[start:stop], flat)
        if exclude_self:
            sq[np.arange(stop - start), np.arange(start, stop)] = np.inf
        out[start:stop] = np.sqrt(np.partition(sq, k - 1, axis=1)[:, k - 1])
    return out


def standardize(data: Dataset):
    """Entrywise z-scores across observations.

    Returns ``(standardized, center, scale)``; entries that are constant over
    the sample are centred only and get ``scale == 1``. Uses the ``N - 1``
    sample standard deviation.
    """
    if len(data) < 2:
        raise ParameterError("standardize needs at least 2 observations")
    values = data.values
    constant = values.max(axis=0) == values.min(axis=0)
    center = np.where(constant, values[0], values.mean(axis=0))
    scale = np.where(constant, 1.0, values.std(axis=0, ddof=1))
    return Dataset((values - center) / scale), center, scale


def unstandardize(values, center, scale) -> np.ndarray:
    return np.asarray(values) * scale + center
