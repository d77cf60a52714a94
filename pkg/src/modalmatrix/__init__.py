"""Mean-shift clustering of matrix-valued observations.

Kernel density estimation on ``P x T`` matrices (fixed, separable, balloon and
sample-point bandwidths), mean-shift mode seeking, a DCT-based synthetic data
generator and partition-quality metrics.
"""
from . import _backend
from .datagen import (
    GenConfig,
    Prototype,
    dct2_forward,
    dct2_inverse,
    derive_seed,
    generate,
    perturb_coefficients,
    preset_prototypes,
    setting_config,
)
from .density import (
    Balloon,
    EstimatorConfig,
    Fixed,
    FittedEstimator,
    SamplePoint,
    Separable,
    amise_bandwidth,
    choose_k,
    density_at,
    fit,
    log_density_at,
    log_density_many,
    normal_scale_gradient_bandwidth,
)
from .errors import (
    DegenerateBandwidthError,
    DimensionError,
    DomainError,
    IsolatedPointError,
    ModalMatrixError,
    ParameterError,
    UndefinedMetricError,
)
from .evaluation import confusion_table, fowlkes_mallows, kmeans, select_k_silhouette, silhouette
from .kernels import KernelSpec, kernel_eval, kernel_gradient, kernel_log_eval
from .meanshift import ClusterResult, MeanShiftConfig, ascend, cluster, merge_modes, ms_step, ms_step_knn_uniform
from .mvd import load_mvd, read_mvd, save_mvd
from .tensor_core import Dataset, knn_query, knn_radii, standardize, unstandardize

__version__ = "0.1.0"
BACKEND = _backend.NAME

__all__ = [name for name in dir() if not name.startswith("_")]
