"""Spherically symmetric matrix kernels written through their scalar profile.

A kernel on P x T matrices is ``K(X) = kappa(tr(X^T X)) / 2``. Two families
are provided:

``gaussian``
    ``kappa(u) = 2 (2 pi)^(-d/2) exp(-u/2)``, so ``K`` is the standard matrix
    Normal density on ``d = P*T`` entries.
``uniform``
    ``kappa(u) = 2 / nu0`` on ``u <= 1`` and 0 outside, with ``nu0`` the volume
    of the unit ball in ``d`` dimensions.

Linear-domain values underflow for ``d`` beyond a few hundred; the ``log_*``
functions do not.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DimensionError, DomainError, ParameterError
from .tensor_core import as_matrix

Family = Literal["gaussian", "uniform"]
FAMILIES = ("gaussian", "uniform")
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class KernelSpec:
    family: Family
    dim: int

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown kernel family {self.family!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ParameterError(f"kernel dimension must be a positive integer, got {self.dim}")


@dataclass(frozen=True)
class ProfileValue:
    kappa: float
    kappa_prime: float


def log_ball_volume(d: int) -> float:
    """Log-volume of the unit ball in ``d`` dimensions, via log-gamma."""
    return 0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d + 1.0)


def profile(spec: KernelSpec, u: float) -> ProfileValue:
    if not u >= 0:
        raise DomainError(f"profile argument must be >= 0, got {u}")
    if spec.family == "gaussian":
        base = math.exp(-0.5 * spec.dim * LOG_2PI - 0.5 * u)
        return ProfileValue(2.0 * base, -base)
    # derivative is distributional at the boundary; zero elsewhere
    kappa = 2.0 * math.exp(-log_ball_volume(spec.dim)) if u <= 1.0 else 0.0
    return ProfileValue(kappa, 0.0)


def log_kernel_sq(spec: KernelSpec, sq_norm):
    """``log K`` as a function of the squared Frobenius norm (array-friendly)."""
    sq_norm = np.asarray(sq_norm, dtype=np.float64)
    if spec.family == "gaussian":
        return -0.5 * spec.dim * LOG_2PI - 0.5 * sq_norm
    return np.where(sq_norm <= 1.0, -log_ball_volume(spec.dim), -np.inf)


def _sq_norm(spec: KernelSpec, X) -> float:
    X = as_matrix(X)
    if X.size != spec.dim:
        raise DimensionError(f"matrix with {X.size} entries does not match kernel dim {spec.dim}")
    return float(np.sum(X * X))


def kernel_eval(spec: KernelSpec, X) -> float:
    """``K(X)``; may underflow to 0 for large ``d``."""
    return 0.5 * profile(spec, _sq_norm(spec, X)).kappa


def kernel_log_eval(spec: KernelSpec, X) -> float:
    """``log K(X)``, ``-inf`` outside the support."""
    return float(log_kernel_sq(spec, _sq_norm(spec, X)))


def kernel_gradient(spec: KernelSpec, X) -> np.ndarray:
    """Matrix gradient ``kappa'(tr X^T X) X`` of a smooth kernel."""
    if spec.family != "gaussian":
        raise ParameterError("gradient is only defined for the gaussian kernel")
    X = as_matrix(X)
    return profile(spec, _sq_norm(spec, X)).kappa_prime * X


def kernel_constants(spec: KernelSpec) -> tuple[float, float]:
    """``(R(K), m2(K))``: squared integral and per-entry second moment."""
    if spec.family == "gaussian":
        return (4.0 * math.pi) ** (-0.5 * spec.dim), 1.0
    if spec.family == "uniform":
        d = spec.dim
        return math.exp(-log_ball_volume(d)), 1.0 / (d + 2)
    raise ParameterError(f"no constants for family {spec.family!r}")
