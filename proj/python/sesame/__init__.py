"""Gaussian-blur attention and squeeze-excitation layer fusion kernels."""

from ._sesame import (
    conv1d_same,
    excite,
    gaussian_kernel,
    multihead_attention,
    rescale,
    scaled_dot_attention,
    softmax_rows,
    squeeze,
    weighted_average,
)

__all__ = [
    "conv1d_same",
    "excite",
    "gaussian_kernel",
    "multihead_attention",
    "rescale",
    "scaled_dot_attention",
    "softmax_rows",
    "squeeze",
    "weighted_average",
]
