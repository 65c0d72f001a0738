"""Generalized elementwise product (GEP) and the kernels built from it.

Two factor layouts are kept deliberately distinct:

* FALCON (pointwise first): ``P`` is N×M (output-major), ``D`` is D×D×N and
  the induced kernel is ``K[i,j,m,n] = P[n,m] * D[i,j,n]``.
* DPConv (depthwise first): ``D`` is D×D×M, ``P`` is M×N (input-major) and
  ``K[i,j,m,n] = D[i,j,m] * P[m,n]``.

Nothing in this package converts silently between the two.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .tensor import transpose_3_4


@dataclass(frozen=True)
class FalconFactors:
    """Rank-k FALCON factors: ``pointwise[r]`` is N×M, ``depthwise[r]`` is D×D×N."""

    pointwise: tuple
    depthwise: tuple

    def __post_init__(self):
        pw = tuple(np.ascontiguousarray(p, dtype=np.float64) for p in self.pointwise)
        dw = tuple(np.ascontiguousarray(d, dtype=np.float64) for d in self.depthwise)
        if not pw or len(pw) != len(dw):
            raise ShapeError(
                f"need k >= 1 matching factor pairs, got {len(pw)} pointwise / {len(dw)} depthwise"
            )
        P0, D0 = pw[0], dw[0]
        if P0.ndim != 2 or D0.ndim != 3 or D0.shape[0] != D0.shape[1]:
            raise ShapeError(f"bad FALCON factor shapes: P {P0.shape}, D {D0.shape}")
        if P0.shape[0] != D0.shape[2]:
            raise ShapeError(
                f"pointwise rows ({P0.shape[0]}) must equal depthwise channels ({D0.shape[2]})"
            )
        for P, Dk in zip(pw, dw):
            if P.shape != P0.shape or Dk.shape != D0.shape:
                raise ShapeError("all rank components must share identical shapes")
        object.__setattr__(self, "pointwise", pw)
        object.__setattr__(self, "depthwise", dw)

    @property
    def rank(self) -> int:
        return len(self.pointwise)

    @property
    def kernel_size(self) -> int:
        return self.depthwise[0].shape[0]

    @property
    def in_channels(self) -> int:
        return self.pointwise[0].shape[1]

    @property
    def out_channels(self) -> int:
        return self.pointwise[0].shape[0]

    @property
    def kernel_shape(self) -> tuple[int, int, int, int]:
        D = self.kernel_size
        return (D, D, self.in_channels, self.out_channels)

    def pairs(self):
        return zip(self.pointwise, self.depthwise)

    @classmethod
    def single(cls, P, D) -> "FalconFactors":
        return cls((P,), (D,))


@dataclass(frozen=True)
class DpconvFactors:
    """Depthwise-then-pointwise factors: ``depthwise`` is D×D×M, ``pointwise`` is M×N."""

    depthwise: np.ndarray
    pointwise: np.ndarray

    def __post_init__(self):
        Dk = np.ascontiguousarray(self.depthwise, dtype=np.float64)
        P = np.ascontiguousarray(self.pointwise, dtype=np.float64)
        if Dk.ndim != 3 or P.ndim != 2 or Dk.shape[0] != Dk.shape[1]:
            raise ShapeError(f"bad DPConv factor shapes: D {Dk.shape}, P {P.shape}")
        if Dk.shape[2] != P.shape[0]:
            raise ShapeError(
                f"depthwise channels ({Dk.shape[2]}) must equal pointwise rows ({P.shape[0]})"
            )
        object.__setattr__(self, "depthwise", Dk)
        object.__setattr__(self, "pointwise", P)

    @property
    def kernel_size(self) -> int:
        return self.depthwise.shape[0]

    @property
    def in_channels(self) -> int:
        return self.pointwise.shape[0]

    @property
    def out_channels(self) -> int:
        return self.pointwise.shape[1]

    @property
    def kernel_shape(self) -> tuple[int, int, int, int]:
        D = self.kernel_size
        return (D, D, self.in_channels, self.out_channels)


def gep_general(A, B) -> np.ndarray:
    """GEP of a p-way ``A`` (last axis M) and a q-way ``B`` (first axis M).

    ``result[i..., m, j...] = A[i..., m] * B[m, j...]``; the result has
    p + q - 1 ways. Every entry is a single product, so the result is exact.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim < 1 or B.ndim < 1:
        raise ShapeError("GEP operands must have at least one axis")
    if A.shape[-1] != B.shape[0]:
        raise ShapeError(
            f"GEP common axis mismatch: last extent of A is {A.shape[-1]}, "
            f"first extent of B is {B.shape[0]}"
        )
    a = A.reshape(A.shape + (1,) * (B.ndim - 1))
    b = B.reshape((1,) * (A.ndim - 1) + B.shape)
    return np.ascontiguousarray(a * b)


def gep_dpconv(f: DpconvFactors) -> np.ndarray:
    """DPConv kernel ``K[i,j,m,n] = D[i,j,m] * P[m,n]``."""
    return gep_general(f.depthwise, f.pointwise)


def _falcon_term(P, Dk) -> np.ndarray:
    return transpose_3_4(gep_general(Dk, P))


def gep_falcon(f: FalconFactors) -> np.ndarray:
    """Rank-1 FALCON kernel ``K[i,j,m,n] = P[n,m] * D[i,j,n]``."""
    if f.rank != 1:
        raise ShapeError(f"gep_falcon takes rank-1 factors, got rank {f.rank}")
    return _falcon_term(f.pointwise[0], f.depthwise[0])


def gep_rank_k(f: FalconFactors) -> np.ndarray:
    """Sum of the rank-1 FALCON kernels, accumulated in ascending r."""
    terms = [_falcon_term(P, Dk) for P, Dk in f.pairs()]
    K = terms[0].copy()
    for term in terms[1:]:
        K += term
    return K


def gep_group(depthwise, pointwise, g: int) -> list[np.ndarray]:
    """Per-group DPConv kernels ``K^l = D^l ⊙ P^l`` for ``g`` groups."""
    depthwise = list(depthwise)
    pointwise = list(pointwise)
    if g < 1 or len(depthwise) != g or len(pointwise) != g:
        raise ShapeError(
            f"expected {g} depthwise and {g} pointwise factors, "
            f"got {len(depthwise)} and {len(pointwise)}"
        )
    kernels = [gep_dpconv(DpconvFactors(Dk, P)) for Dk, P in zip(depthwise, pointwise)]
    if any(k.shape != kernels[0].shape for k in kernels):
        raise ShapeError("all groups must share identical kernel shapes")
    return kernels
