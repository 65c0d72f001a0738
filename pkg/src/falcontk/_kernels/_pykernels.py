"""Pure-Python (numpy) convolution kernels.

Each function vectorizes over output positions and channels but performs the
per-element reduction as a sequence of separate multiply and add steps in a
fixed order, so results match the compiled kernels bit for bit. Every
function returns ``(output, macs)`` where ``macs`` counts executed
multiply-adds, padded taps included.
"""
import numpy as np


def _pad(I, p):
    if p == 0:
        return I
    H, W, C = I.shape
    out = np.zeros((H + 2 * p, W + 2 * p, C))
    out[p:p + H, p:p + W, :] = I
    return out


def conv2d(I, K, s, p, Ho, Wo):
    """Standard convolution; reduction order i, then j, then m."""
    D, _, M, N = K.shape
    Ip = _pad(I, p)
    out = np.zeros((Ho, Wo, N))
    macs = 0
    for i in range(D):
        for j in range(D):
            window = Ip[i:i + (Ho - 1) * s + 1:s, j:j + (Wo - 1) * s + 1:s, :]
            for m in range(M):
                out += window[:, :, m, None] * K[i, j, m][None, None, :]
                macs += out.size
    return out, macs


def depthwise(I, Dk, s, p, Ho, Wo):
    """Per-channel convolution; reduction order i, then j."""
    D = Dk.shape[0]
    Ip = _pad(I, p)
    out = np.zeros((Ho, Wo, I.shape[2]))
    macs = 0
    for i in range(D):
        for j in range(D):
            window = Ip[i:i + (Ho - 1) * s + 1:s, j:j + (Wo - 1) * s + 1:s, :]
            out += window * Dk[i, j][None, None, :]
            macs += out.size
    return out, macs


def pointwise(I, P):
    """1×1 convolution with an M×N matrix; reduction over m ascending."""
    H, W, M = I.shape
    out = np.zeros((H, W, P.shape[1]))
    macs = 0
    for m in range(M):
        out += I[:, :, m, None] * P[m][None, None, :]
        macs += out.size
    return out, macs
