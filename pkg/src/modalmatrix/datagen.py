"""Synthetic matrix-variate clusters built in the 2-d DCT domain.

An observation from prototype ``M`` is ``inverse(forward(M) + E * U)`` with
``U`` iid Bernoulli(rho) and ``E`` iid Normal(0, sigma^2) entrywise over the
coefficients. The transform is the orthonormal DCT-II, so with ``rho = 1``
clusters are exactly spherical matrix normal around ``M``.

Random streams
--------------
Observation ``i`` draws from its own ``numpy.random.Philox`` generator keyed by
``SeedSequence(seed, spawn_key=(i,))``, consuming in order: one uniform for the
label, ``P*T`` uniforms for the Bernoulli mask (row-major), ``P*T`` standard
normals for the noise (row-major). The identifier in :data:`RNG_ALGORITHM`
is written into generated files.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ParameterError
from .tensor_core import Dataset, as_matrix

RNG_ALGORITHM = "numpy-philox4x64/seedsequence-spawn-v1"
PRESET_VERSION = "v1"
PRESET_NAMES = ("A", "B", "C")

SETTINGS = {
    "single": (("A",), (1.0,)),
    "two-balanced": (("B", "C"), (0.5, 0.5)),
    "two-imbalanced": (("B", "C"), (0.1, 0.9)),
}


@dataclass(frozen=True, eq=False)
class Prototype:
    M: np.ndarray
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "M", as_matrix(self.M))


@dataclass(frozen=True, eq=False)
class GenConfig:
    prototypes: tuple
    weights: tuple
    rho: float = 1.0
    sigma: float = 1.0
    N: int = 200
    seed: int = 0

    def __post_init__(self):
        protos = tuple(p if isinstance(p, Prototype) else Prototype(p) for p in self.prototypes)
        object.__setattr__(self, "prototypes", protos)
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not protos:
            raise ParameterError("at least one prototype is required")
        if len({p.M.shape for p in protos}) != 1:
            raise ParameterError("prototypes must share one shape")
        if len(self.weights) != len(protos):
            raise ParameterError("one weight per prototype is required")
        if any(not w > 0 for w in self.weights) or abs(math.fsum(self.weights) - 1.0) > 1e-12:
            raise ParameterError(f"weights must be positive and sum to 1, got {self.weights}")
        if not 0.0 <= self.rho <= 1.0:
            raise ParameterError(f"rho must lie in [0, 1], got {self.rho}")
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")
        if int(self.N) != self.N or self.N < 1:
            raise ParameterError(f"N must be a positive integer, got {self.N}")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError("seed must be an unsigned 64-bit integer")

    @property
    def shape(self):
        return self.prototypes[0].M.shape


@functools.lru_cache(maxsize=64)
def _dct_matrix_cached(n: int) -> np.ndarray:
    i = np.arange(n)
    C = np.cos(np.pi * (2 * i[None, :] + 1) * i[:, None] / (2 * n))
    C *= np.where(i == 0, math.sqrt(1.0 / n), math.sqrt(2.0 / n))[:, None]
    C.setflags(write=False)
    return C


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis; row ``p`` is the ``p``-th cosine."""
    return _dct_matrix_cached(int(n)).copy()


def dct2_forward(M) -> np.ndarray:
    M = as_matrix(M)
    L = _dct_matrix_cached(M.shape[0])
    R = _dct_matrix_cached(M.shape[1])
    return L @ M @ R.T


def dct2_inverse(Omega) -> np.ndarray:
    Omega = as_matrix(Omega)
    L = _dct_matrix_cached(Omega.shape[0])
    R = _dct_matrix_cached(Omega.shape[1])
    return L.T @ Omega @ R


def _noise(shape, rho, sigma, rng):
    mask = rng.random(shape) < rho
    eps = rng.standard_normal(shape) * sigma
    return np.where(mask, eps, 0.0)


def perturb_coefficients(Omega, rho: float, sigma: float, rng) -> np.ndarray:
    """Add ``Normal(0, sigma^2)`` noise to a ``Bernoulli(rho)`` subset of entries."""
    if not 0.0 <= rho <= 1.0:
        raise ParameterError(f"rho must lie in [0, 1], got {rho}")
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    Omega = as_matrix(Omega)
    return Omega + _noise(Omega.shape, rho, sigma, rng)


def observation_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(index),))))


def derive_seed(seed: int, index: int) -> int:
    """Independent 64-bit seed for sub-task ``index`` of a run seeded with ``seed``."""
    state = np.random.SeedSequence(int(seed), spawn_key=(int(index),)).generate_state(1, dtype=np.uint64)
    return int(state[0])


def generate(cfg: GenConfig):
    """Draw ``cfg.N`` observations; returns ``(Dataset, labels)``.

    Noise is injected as ``M + inverse(E * U)``, equal to
    ``inverse(forward(M) + E * U)`` by linearity but exact when ``rho == 0``.
    """
    cum = np.cumsum(cfg.weights)
    cum[-1] = 1.0
    shape = cfg.shape
    X = np.empty((cfg.N,) + shape)
    labels = np.empty(cfg.N, dtype=np.int64)
    for i in range(cfg.N):
        rng = observation_rng(cfg.seed, i)
        j = int(np.searchsorted(cum, rng.random(), side="right"))
        labels[i] = j
        X[i] = cfg.prototypes[j].M + dct2_inverse(_noise(shape, cfg.rho, cfg.sigma, rng))
    return Dataset(X), labels


def _formula_prototype(name: str, P: int, T: int) -> np.ndarray:
    r = (np.arange(P)[:, None] + 0.5) / P
    s = (np.arange(T)[None, :] + 0.5) / T
    if name == "A":
        return 3.0 * np.cos(np.pi * s) + 1.5 * np.cos(np.pi * r)
    base = 2.0 * np.cos(2.0 * np.pi * s) + np.cos(np.pi * r) * np.ones_like(s)
    delta = 0.6 + np.cos(np.pi * s) + 0.5 * np.cos(np.pi * r) * np.sin(np.pi * s)
    # rms(delta) = 3, so |B - C|_F = 6 sqrt(P T)
    delta = delta * (3.0 / np.sqrt(np.mean(delta**2)))
    return base + delta if name == "B" else base - delta


def _asset_name(P: int, T: int) -> str:
    return f"prototypes_{P}x{T}.mvd"


def preset_prototypes(name: str, P: int = 5, T: int = 5) -> Prototype:
    """Repo-defined smooth prototypes ``A`` (single group), ``B`` and ``C``.

    Shapes with a shipped asset (5x5, 5x20) are read from
    ``data/v1/prototypes_<P>x<T>.mvd``; other shapes use the same closed form.
    """
    if name not in PRESET_NAMES:
        raise ParameterError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}")
    if P < 1 or T < 1:
        raise ParameterError("P and T must be positive")
    asset = resources.files("modalmatrix").joinpath("data", PRESET_VERSION, _asset_name(P, T))
    if asset.is_file():
        from .mvd import read_mvd

        data, _, _ = read_mvd(asset.read_text())
        M = data[PRESET_NAMES.index(name)].copy()
    else:
        M = _formula_prototype(name, P, T)
    return Prototype(M, name)


def setting_config(setting: str, P: int = 5, T: int = 5, **kw) -> GenConfig:
    """GenConfig for a named setting: ``single``, ``two-balanced`` or ``two-imbalanced``."""
    if setting not in SETTINGS:
        raise ParameterError(f"unknown setting {setting!r}; expected one of {sorted(SETTINGS)}")
    names, weights = SETTINGS[setting]
    return GenConfig(tuple(preset_prototypes(n, P, T) for n in names), weights, **kw)
