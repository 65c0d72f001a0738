"""FALCON-family forward operators.

Only the linear part of each block is modelled; batch normalization and
activations are identity here.
"""
from __future__ import annotations

import numpy as np

from .conv import MacCounter, conv2d_depthwise, conv2d_pointwise
from .errors import GeometryError, ShapeError
from .gep import DpconvFactors, FalconFactors


def _check_channels(I, M):
    if np.ndim(I) != 3 or np.shape(I)[2] != M:
        raise ShapeError(f"factors expect an H×W×{M} input, got shape {np.shape(I)}")


def falcon_forward(I, f: FalconFactors, s: int = 1, p: int = 0,
                   counter: MacCounter | None = None) -> np.ndarray:
    """Pointwise (N×M matrix, stride 1) then depthwise (stride s, padding p)."""
    if f.rank != 1:
        raise ShapeError(f"falcon_forward takes rank-1 factors, got rank {f.rank}")
    _check_channels(I, f.in_channels)
    hidden = conv2d_pointwise(I, f.pointwise[0].T, counter)
    return conv2d_depthwise(hidden, f.depthwise[0], s, p, counter)


def dpconv_forward(I, f: DpconvFactors, s: int = 1, p: int = 0,
                   counter: MacCounter | None = None) -> np.ndarray:
    """Depthwise (stride s, padding p) then pointwise (M×N matrix)."""
    _check_channels(I, f.in_channels)
    hidden = conv2d_depthwise(I, f.depthwise, s, p, counter)
    return conv2d_pointwise(hidden, f.pointwise, counter)


def falcon_rank_k_forward(I, f: FalconFactors, s: int = 1, p: int = 0,
                          counter: MacCounter | None = None) -> np.ndarray:
    """Sum of k independent FALCON passes, accumulated in ascending r."""
    out = None
    for P, Dk in f.pairs():
        term = falcon_forward(I, FalconFactors.single(P, Dk), s, p, counter)
        out = term if out is None else out + term
    return out


def shuffle_permutation(C: int, g: int) -> np.ndarray:
    """``perm[c]`` is the position channel c moves to under a g-group shuffle."""
    if g < 1 or C % g:
        raise ShapeError(f"shuffle groups g={g} must divide channel count {C}")
    c = np.arange(C)
    per_group = C // g
    return (c % per_group) * g + c // per_group


def channel_shuffle(T, g: int) -> np.ndarray:
    """Reshape channels to (g, C/g), transpose, flatten."""
    T = np.asarray(T, dtype=np.float64)
    if T.ndim != 3:
        raise ShapeError(f"channel_shuffle needs an H×W×C tensor, got shape {T.shape}")
    perm = shuffle_permutation(T.shape[2], g)
    out = np.empty_like(T)
    out[:, :, perm] = T
    return out


def channel_unshuffle(T, g: int) -> np.ndarray:
    T = np.asarray(T, dtype=np.float64)
    perm = shuffle_permutation(T.shape[2], g)
    return np.ascontiguousarray(T[:, :, perm])


def _split_halves(I):
    I = np.asarray(I, dtype=np.float64)
    if I.ndim != 3:
        raise ShapeError(f"branch input must be H×W×M, got shape {I.shape}")
    M = I.shape[2]
    if M % 2:
        raise ShapeError(f"branch blocks need an even channel count, got M={M}")
    return I[:, :, : M // 2], I[:, :, M // 2:]


def _merge(left, right, I):
    if left.shape[:2] != I.shape[:2]:
        raise GeometryError(
            f"left branch changed spatial size {I.shape[:2]} -> {left.shape[:2]}; "
            "use stride 1 and padding (D-1)/2"
        )
    if left.shape[2] != right.shape[2]:
        raise ShapeError(f"left branch produced {left.shape[2]} channels, expected {right.shape[2]}")
    return channel_shuffle(np.concatenate([left, right], axis=2), 2)


def branch_forward(I, left_op) -> np.ndarray:
    """Split channels in half, apply ``left_op`` to the first half, keep the
    second half, concatenate and shuffle with g=2."""
    left, right = _split_halves(I)
    return _merge(left_op(left), right, np.asarray(I))


def falcon_branch_forward(I, f: FalconFactors, p: int | None = None,
                          counter: MacCounter | None = None) -> np.ndarray:
    """FALCON on the first M/2 channels, identity on the rest, then shuffle.

    Stride is fixed at 1; ``p`` defaults to (D-1)/2 so spatial size is kept.
    """
    if p is None:
        if f.kernel_size % 2 == 0:
            raise GeometryError(f"even kernel size {f.kernel_size} cannot preserve spatial size")
        p = (f.kernel_size - 1) // 2
    return branch_forward(I, lambda x: falcon_forward(x, f, 1, p, counter))
