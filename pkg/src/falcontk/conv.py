"""Reference 2-D convolutions (standard, depthwise, pointwise, grouped).

Layouts: inputs are H×W×C, kernels D×D×M×N, depthwise kernels D×D×C,
pointwise matrices M×N. Padding is zero padding; there are no bias terms.
Output position (h', w') reads input row ``h'*s + i - p`` (0-based).

All reductions run in a fixed order (i, then j, then m) so results are
reproducible bit for bit regardless of backend. Pass a :class:`MacCounter`
to record how many multiply-adds a call executed.
"""
from __future__ import annotations

import numpy as np

from . import _kernels
from .errors import GeometryError, ShapeError
from .tensor import ConvDims


class MacCounter:
    """Accumulates the multiply-adds reported by the kernels."""

    def __init__(self):
        self.count = 0

    def add(self, n: int) -> None:
        self.count += int(n)

    def __repr__(self):
        return f"MacCounter(count={self.count})"


def output_dims(dims: ConvDims) -> tuple[int, int]:
    Ho, Wo = dims.out_h, dims.out_w
    if Ho < 1 or Wo < 1:
        raise GeometryError(f"degenerate geometry: output would be {Ho}×{Wo} for {dims}")
    return Ho, Wo


def _geometry(H, W, D, s, p) -> tuple[int, int]:
    if int(s) != s or s < 1 or int(p) != p or p < 0:
        raise GeometryError(f"stride must be >= 1 and padding >= 0, got s={s}, p={p}")
    if D > H + 2 * p or D > W + 2 * p:
        raise GeometryError(
            f"degenerate geometry: {D}×{D} kernel does not fit a "
            f"{H}×{W} input padded by {p}"
        )
    return (H + 2 * p - D) // s + 1, (W + 2 * p - D) // s + 1


def _input(I) -> np.ndarray:
    I = np.ascontiguousarray(I, dtype=np.float64)
    if I.ndim != 3:
        raise ShapeError(f"input must be H×W×C, got shape {I.shape}")
    return I


def conv2d_standard(I, K, s: int = 1, p: int = 0, counter: MacCounter | None = None) -> np.ndarray:
    """``O[h',w',n] = sum_{i,j,m} K[i,j,m,n] * I[h'*s+i-p, w'*s+j-p, m]``."""
    I = _input(I)
    K = np.ascontiguousarray(K, dtype=np.float64)
    if K.ndim != 4 or K.shape[0] != K.shape[1]:
        raise ShapeError(f"kernel must be D×D×M×N, got shape {K.shape}")
    if K.shape[2] != I.shape[2]:
        raise ShapeError(f"kernel expects {K.shape[2]} input channels, input has {I.shape[2]}")
    Ho, Wo = _geometry(I.shape[0], I.shape[1], K.shape[0], s, p)
    out, macs = _kernels.conv2d(I, K, int(s), int(p), Ho, Wo)
    if counter is not None:
        counter.add(macs)
    return out


def conv2d_depthwise(I, Dk, s: int = 1, p: int = 0, counter: MacCounter | None = None) -> np.ndarray:
    """Channel-by-channel convolution with a D×D×C kernel."""
    I = _input(I)
    Dk = np.ascontiguousarray(Dk, dtype=np.float64)
    if Dk.ndim != 3 or Dk.shape[0] != Dk.shape[1]:
        raise ShapeError(f"depthwise kernel must be D×D×C, got shape {Dk.shape}")
    if Dk.shape[2] != I.shape[2]:
        raise ShapeError(f"depthwise kernel has {Dk.shape[2]} channels, input has {I.shape[2]}")
    Ho, Wo = _geometry(I.shape[0], I.shape[1], Dk.shape[0], s, p)
    out, macs = _kernels.depthwise(I, Dk, int(s), int(p), Ho, Wo)
    if counter is not None:
        counter.add(macs)
    return out


def conv2d_pointwise(I, P, counter: MacCounter | None = None) -> np.ndarray:
    """1×1 convolution ``O[h,w,n] = sum_m P[m,n] * I[h,w,m]`` with P of shape M×N."""
    I = _input(I)
    P = np.ascontiguousarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != I.shape[2]:
        raise ShapeError(
            f"pointwise matrix must be {I.shape[2]}×N for this input, got shape {P.shape}"
        )
    out, macs = _kernels.pointwise(I, P)
    if counter is not None:
        counter.add(macs)
    return out


def conv2d_group(I, kernels, s: int = 1, p: int = 0, counter: MacCounter | None = None) -> np.ndarray:
    """Grouped convolution: channel block l of ``I`` is convolved with ``kernels[l]``."""
    I = _input(I)
    kernels = [np.asarray(k, dtype=np.float64) for k in kernels]
    g = len(kernels)
    if g < 1:
        raise ShapeError("need at least one group kernel")
    Mg = kernels[0].shape[2] if kernels[0].ndim == 4 else -1
    if any(k.shape != kernels[0].shape for k in kernels) or kernels[0].ndim != 4:
        raise ShapeError("group kernels must all be D×D×(M/g)×(N/g) with identical shapes")
    if Mg * g != I.shape[2]:
        raise ShapeError(f"{g} groups of {Mg} channels do not cover {I.shape[2]} input channels")
    outs = [
        conv2d_standard(I[:, :, l * Mg:(l + 1) * Mg], k, s, p, counter)
        for l, k in enumerate(kernels)
    ]
    return np.concatenate(outs, axis=2)
