"""Dense tensor helpers.

Tensors are plain ``numpy.ndarray`` objects holding float64 values in C
(row-major, last index fastest) order. The helpers here validate that
contract and provide the handful of reshapes the factorization code relies
on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, ShapeError


def as_tensor(data, ndim: int | None = None, name: str = "tensor") -> np.ndarray:
    """Return ``data`` as a read-only, C-contiguous float64 array.

    Raises ShapeError if any extent is zero or ``ndim`` does not match.
    """
    arr = np.array(data, dtype=np.float64, order="C", copy=True)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if ndim is not None and arr.ndim != ndim:
        raise ShapeError(f"{name} must be {ndim}-way, got shape {arr.shape}")
    if any(e < 1 for e in arr.shape):
        raise ShapeError(f"{name} has a zero extent: {arr.shape}")
    arr.flags.writeable = False
    return arr


def row_major_strides(shape) -> tuple[int, ...]:
    """Element strides for ``shape`` with the last index fastest."""
    strides = []
    acc = 1
    for extent in reversed(shape):
        strides.append(acc)
        acc *= extent
    return tuple(reversed(strides))


def flat_offset(index, shape) -> int:
    if len(index) != len(shape):
        raise ShapeError(f"index {index} does not match shape {shape}")
    for i, e in zip(index, shape):
        if not 0 <= i < e:
            raise IndexError(f"index {index} out of range for shape {shape}")
    return sum(i * s for i, s in zip(index, row_major_strides(shape)))


def unravel(offset: int, shape) -> tuple[int, ...]:
    size = math.prod(shape)
    if not 0 <= offset < size:
        raise IndexError(f"offset {offset} out of range for shape {shape}")
    index = []
    for s in row_major_strides(shape):
        q, offset = divmod(offset, s)
        index.append(q)
    return tuple(index)


def transpose_3_4(K) -> np.ndarray:
    """Swap the third and fourth axes of a 4-way tensor."""
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 4:
        raise ShapeError(f"transpose_3_4 needs a 4-way tensor, got {K.ndim}-way")
    return np.ascontiguousarray(K.transpose(0, 1, 3, 2))


def frobenius_norm(T) -> float:
    """Square root of the sum of squared entries.

    The sum uses ``math.fsum`` so the result is correctly rounded and does not
    depend on element order (a permuted tensor has bit-identical norm).
    """
    flat = np.asarray(T, dtype=np.float64).ravel()
    return math.sqrt(math.fsum((flat * flat).tolist()))


def unfold_output_slice(K, n: int) -> np.ndarray:
    """The D²×M matrix of output channel ``n``; row ``i*D + j`` holds ``K[i, j, :, n]``."""
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 4 or K.shape[0] != K.shape[1]:
        raise ShapeError(f"expected a D×D×M×N kernel, got shape {K.shape}")
    N = K.shape[3]
    if not 0 <= n < N:
        raise IndexError(f"output channel {n} out of range [0, {N})")
    D, M = K.shape[0], K.shape[2]
    return np.ascontiguousarray(K[:, :, :, n]).reshape(D * D, M)


def refold_output_slice(A, D: int) -> np.ndarray:
    """Inverse of :func:`unfold_output_slice`: D²×M matrix back to D×D×M."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != D * D:
        raise ShapeError(f"expected a {D * D}×M matrix, got shape {A.shape}")
    return A.reshape(D, D, A.shape[1]).copy()


@dataclass(frozen=True)
class ConvDims:
    """Geometry of one convolution layer.

    D is the (square) kernel size, M/N the input/output channel counts, H/W
    the input extents, s the stride and p the zero padding.
    """

    D: int
    M: int
    N: int
    H: int
    W: int
    s: int = 1
    p: int = 0

    def __post_init__(self):
        for field in ("D", "M", "N", "H", "W", "s"):
            value = getattr(self, field)
            if int(value) != value or value < 1:
                raise GeometryError(f"{field} must be a positive integer, got {value!r}")
        if int(self.p) != self.p or self.p < 0:
            raise GeometryError(f"p must be a nonnegative integer, got {self.p!r}")
        if self.D > self.H + 2 * self.p or self.D > self.W + 2 * self.p:
            raise GeometryError(
                f"kernel size D={self.D} exceeds padded input "
                f"{self.H + 2 * self.p}×{self.W + 2 * self.p}"
            )

    @property
    def out_h(self) -> int:
        return (self.H + 2 * self.p - self.D) // self.s + 1

    @property
    def out_w(self) -> int:
        return (self.W + 2 * self.p - self.D) // self.s + 1
