"""FALCON convolution-kernel factorization toolkit.

Builds standard convolution kernels from pointwise/depthwise factor pairs
through the generalized elementwise product, fits such factors to a given
kernel, runs the corresponding forward passes, and counts parameters and
FLOPs.
"""
from importlib import resources

from ._kernels import BACKEND
from .analysis import (
    ArchitectureReport, ConvType, LayerSpec, analyze_architecture, compression_rate,
    computation_reduction_rate, count_flops, count_params,
)
from .conv import (
    MacCounter, conv2d_depthwise, conv2d_group, conv2d_pointwise, conv2d_standard, output_dims,
)
from .errors import (
    CountError, DivergenceError, FalconError, FormatError, GeometryError, RankError, ShapeError,
)
from .falcon import (
    channel_shuffle, dpconv_forward, falcon_branch_forward, falcon_forward,
    falcon_rank_k_forward,
)
from .fitting import (
    FitConfig, fit, fit_dpconv, fit_iterative, fit_svd, normalize_factors, objective_gradient,
    reconstruct, residual,
)
from .ftk import read_ftk, write_ftk
from .gep import DpconvFactors, FalconFactors, gep_dpconv, gep_falcon, gep_general, gep_group, gep_rank_k
from .tensor import ConvDims, frobenius_norm, transpose_3_4, unfold_output_slice

__version__ = "0.1.0"


def vgg19_config_path():
    """Path of the bundled shrunk-VGG19 (CIFAR-100) architecture config."""
    return resources.files(__package__) / "data" / "vgg19_cifar100.cfg"
