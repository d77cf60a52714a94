"""Kernel density estimators for matrix-variate samples.

Four estimator variants share one fitted object:

* :class:`Fixed` -- scalar bandwidth ``h``.
* :class:`Separable` -- Kronecker bandwidth ``U (x) V``; ``U`` (P x P) scales rows
  and ``V`` (T x T) columns, both in covariance units. Gaussian kernel only.
* :class:`Balloon` -- bandwidth ``delta_k(Y)``, the distance from the query to its
  ``k``-th nearest sample point.
* :class:`SamplePoint` -- bandwidth ``h * delta_k(X_n)`` attached to each sample
  point, self excluded.

Everything is evaluated in the log domain and exponentiated only on request.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateBandwidthError, DimensionError, ParameterError
from .kernels import LOG_2PI, KernelSpec, log_kernel_sq
from .tensor_core import Dataset, as_matrix, knn_radii, smallest_k, squared_distances


@dataclass(frozen=True)
class Fixed:
    h: float


@dataclass(frozen=True)
class Separable:
    U: np.ndarray
    V: np.ndarray


@dataclass(frozen=True)
class Balloon:
    k: int


@dataclass(frozen=True)
class SamplePoint:
    k: int
    h: float


_DEFAULT_KERNEL = {Fixed: "gaussian", Separable: "gaussian", Balloon: "uniform", SamplePoint: "gaussian"}


@dataclass(frozen=True)
class EstimatorConfig:
    """An estimator variant plus kernel family (defaults: uniform for
    :class:`Balloon`, gaussian otherwise)."""

    variant: Fixed | Separable | Balloon | SamplePoint
    kernel: str | None = None

    @property
    def kernel_family(self) -> str:
        return self.kernel or _DEFAULT_KERNEL[type(self.variant)]

    @classmethod
    def fixed(cls, h, kernel=None):
        return cls(Fixed(float(h)), kernel)

    @classmethod
    def separable(cls, U, V):
        return cls(Separable(np.asarray(U, dtype=float), np.asarray(V, dtype=float)))

    @classmethod
    def balloon(cls, k, kernel=None):
        return cls(Balloon(int(k)), kernel)

    @classmethod
    def sample_point(cls, k, h, kernel=None):
        return cls(SamplePoint(int(k), float(h)), kernel)


@dataclass(frozen=True, eq=False)
class FittedEstimator:
    config: EstimatorConfig
    data: Dataset
    kernel: KernelSpec
    point_scales: np.ndarray | None = None
    # separable only: X -> row_whiten @ X @ col_whiten maps to unit covariance
    row_whiten: np.ndarray | None = None
    col_whiten: np.ndarray | None = None
    log_det_term: float = 0.0
    whitened: np.ndarray | None = field(default=None, repr=False)

    @property
    def variant(self):
        return self.config.variant

    def whiten(self, Y) -> np.ndarray:
        return self.row_whiten @ np.asarray(Y) @ self.col_whiten

    def unwhiten(self, Z) -> np.ndarray:
        return np.linalg.solve(self.row_whiten, np.asarray(Z)) @ np.linalg.inv(self.col_whiten)

    def gaussian_weights(self):
        """``(flat, log_coef, inv_bw2)`` driving the gaussian mean-shift kernel.

        Sample-point terms carry ``h_n^-(d+2)``: the mean-shift weights are
        ``-kappa'`` times the per-term factor in front of the gradient.
        """
        N, d = len(self.data), self.data.dim
        v = self.variant
        if isinstance(v, Fixed):
            return self.data.flat, np.zeros(N), np.full(N, 1.0 / v.h**2)
        if isinstance(v, SamplePoint):
            s = self.point_scales
            return self.data.flat, -(d + 2) * np.log(s), 1.0 / s**2
        if isinstance(v, Separable):
            return self.whitened, np.zeros(N), np.ones(N)
        raise ParameterError("balloon estimators have no gaussian mean-shift weights")


def _spd_cholesky(M, n, name):
    M = np.asarray(M, dtype=np.float64)
    if M.shape != (n, n):
        raise DimensionError(f"{name} must be {n} x {n}, got {M.shape}")
    if not np.allclose(M, M.T, rtol=1e-12, atol=1e-14):
        raise ParameterError(f"{name} is not symmetric")
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise ParameterError(f"{name} is not positive definite") from None


def fit(config: EstimatorConfig, data: Dataset) -> FittedEstimator:
    """Validate ``config`` against ``data`` and cache per-point quantities."""
    data = data if isinstance(data, Dataset) else Dataset(data)
    N = len(data)
    P, T = data.shape
    kernel = KernelSpec(config.kernel_family, data.dim)
    v = config.variant
    if isinstance(v, Fixed):
        if not (v.h > 0 and math.isfinite(v.h)):
            raise ParameterError(f"bandwidth must be positive, got {v.h}")
        return FittedEstimator(config, data, kernel)
    if isinstance(v, SamplePoint):
        if not (v.h > 0 and math.isfinite(v.h)):
            raise ParameterError(f"bandwidth must be positive, got {v.h}")
        if not 2 <= v.k <= N - 1:
            raise ParameterError(f"sample-point k={v.k} must lie in [2, {N - 1}]")
        radii = knn_radii(data, v.k, exclude_self=True)
        bad = np.flatnonzero(radii <= 0)
        if bad.size:
            raise DegenerateBandwidthError(
                f"delta_k is zero at observations {bad.tolist()} (duplicated points)", bad
            )
        return FittedEstimator(config, data, kernel, point_scales=v.h * radii)
    if isinstance(v, Balloon):
        if not 2 <= v.k <= N:
            raise ParameterError(f"balloon k={v.k} must lie in [2, {N}]")
        return FittedEstimator(config, data, kernel)
    if isinstance(v, Separable):
        if kernel.family != "gaussian":
            raise ParameterError("separable bandwidths support the gaussian kernel only")
        LU = _spd_cholesky(v.U, P, "U")
        LV = _spd_cholesky(v.V, T, "V")
        row = np.linalg.inv(LU)
        col = np.linalg.inv(LV).T
        log_det_U = 2.0 * np.log(np.diag(LU)).sum()
        log_det_V = 2.0 * np.log(np.diag(LV)).sum()
        whitened = (row @ data.values @ col).reshape(N, -1)
        return FittedEstimator(
            config, data, kernel,
            row_whiten=row, col_whiten=col,
            log_det_term=-0.5 * P * log_det_V - 0.5 * T * log_det_U,
            whitened=np.ascontiguousarray(whitened),
        )
    raise ParameterError(f"unknown estimator variant {v!r}")


def _logsumexp(a) -> float:
    top = np.max(a)
    if not np.isfinite(top):
        return float(top)
    return float(top + np.log(np.sum(np.exp(a - top))))


def balloon_radius_sq(est: FittedEstimator, sq: np.ndarray) -> float:
    k = est.variant.k
    return float(sq[smallest_k(sq, k)[-1]])


def log_density_at(est: FittedEstimator, Y) -> float:
    Y = as_matrix(Y)
    if Y.shape != est.data.shape:
        raise DimensionError(f"query shape {Y.shape} does not match data shape {est.data.shape}")
    N, d = len(est.data), est.data.dim
    v = est.variant
    if isinstance(v, Separable):
        q = squared_distances(est.whiten(Y).ravel(), est.whitened)
        return _logsumexp(-0.5 * d * LOG_2PI - 0.5 * q) + est.log_det_term - math.log(N)
    sq = squared_distances(Y.ravel(), est.data.flat)
    if isinstance(v, Fixed):
        terms = log_kernel_sq(est.kernel, sq / v.h**2)
        return _logsumexp(terms) - math.log(N) - d * math.log(v.h)
    if isinstance(v, SamplePoint):
        s = est.point_scales
        terms = log_kernel_sq(est.kernel, sq / s**2) - d * np.log(s)
        return _logsumexp(terms) - math.log(N)
    if isinstance(v, Balloon):
        r2 = balloon_radius_sq(est, sq)
        if r2 <= 0:
            raise DegenerateBandwidthError(
                f"query coincides with at least k={v.k} sample points; balloon radius is zero"
            )
        if est.kernel.family == "uniform":
            # compare on squared distances so the k-th neighbour is always inside
            terms = np.where(sq <= r2, log_kernel_sq(est.kernel, 0.0), -np.inf)
        else:
            terms = log_kernel_sq(est.kernel, sq / r2)
        return _logsumexp(terms) - math.log(N) - 0.5 * d * math.log(r2)
    raise ParameterError(f"unknown estimator variant {v!r}")


def density_at(est: FittedEstimator, Y) -> float:
    """Linear-domain density; underflows to 0 in high dimension."""
    return math.exp(log_density_at(est, Y))


def log_density_many(est: FittedEstimator, queries) -> np.ndarray:
    queries = queries.values if isinstance(queries, Dataset) else np.asarray(queries, dtype=float)
    return np.array([log_density_at(est, Y) for Y in queries])


def amise_bandwidth(N, d, R_K, m2_K, R_laplacian_f) -> float:
    """Scalar bandwidth minimising ``R_K / (N h^d) + h^4 m2^2 R(lap f) / 4``."""
    for name, val in (("N", N), ("d", d), ("R_K", R_K), ("m2_K", m2_K), ("R_laplacian_f", R_laplacian_f)):
        if not val > 0:
            raise ParameterError(f"{name} must be positive, got {val}")
    return (d * R_K / (m2_K**2 * R_laplacian_f)) ** (1.0 / (d + 4)) * N ** (-1.0 / (d + 4))


def amise(h, N, d, R_K, m2_K, R_laplacian_f):
    h = np.asarray(h, dtype=float)
    return R_K / (N * h**d) + 0.25 * h**4 * m2_K**2 * R_laplacian_f


def pooled_sd(data: Dataset) -> float:
    """Mean over entries of the per-entry sample standard deviation."""
    return float(data.values.std(axis=0, ddof=1).mean())


def normal_scale_gradient_bandwidth(data: Dataset) -> float:
    """Normal-reference bandwidth for density-gradient estimation.

    ``h = sd * (4 / (N (d + 4)))^(1 / (d + 6))`` with ``sd`` from :func:`pooled_sd`.
    """
    N = len(data)
    if N < 2:
        raise ParameterError("need at least 2 observations")
    sd = pooled_sd(data)
    if not sd > 0:
        raise ParameterError("pooled standard deviation is zero")
    d = data.dim
    return sd * (4.0 / (N * (d + 4))) ** (1.0 / (d + 6))


K_RULES = {"half": 0.5, "one": 1.0, "five": 5.0}


def choose_k(rule, N: int) -> int:
    """``round(c * sqrt(N))`` clamped to ``[2, N - 1]``; ``rule`` is
    ``"half"``, ``"one"``, ``"five"`` or the multiplier itself."""
    c = K_RULES[rule] if isinstance(rule, str) else float(rule)
    if N < 4:
        raise ParameterError(f"choose_k needs N >= 4, got {N}")
    k = math.floor(c * math.sqrt(N) + 0.5)
    return int(min(max(k, 2), N - 1))
