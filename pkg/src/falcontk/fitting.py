"""Fitting FALCON / DPConv factors to a given standard convolution kernel.

Two routes solve ``min ||K - reconstruct(factors)||_F``:

``fit_svd``
    Closed form. Each output channel's D²×M unfolding only interacts with its
    own factor entries, so the problem splits into N independent best rank-k
    approximations, each given by a truncated SVD.
``fit_iterative``
    Full-batch AdamW (weight decay 0 by default) on all factor entries at
    once against the squared residual.

Both return factors in canonical form (see :func:`normalize_factors`).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import DivergenceError, RankError, ShapeError
from .gep import DpconvFactors, FalconFactors, gep_dpconv, gep_rank_k
from .optim import AdamW
from .tensor import frobenius_norm

log = logging.getLogger(__name__)

METHODS = ("svd", "iterative")
ORIENTATIONS = ("falcon", "dpconv")
INITS = ("warm_svd", "random")


@dataclass(frozen=True)
class FitConfig:
    method: str = "svd"
    rank: int = 1
    orientation: str = "falcon"
    learning_rate: float = 1e-3
    max_iters: int = 1000
    tolerance: float = 1e-8
    seed: int = 0
    init: str = "warm_svd"
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"orientation must be one of {ORIENTATIONS}, got {self.orientation!r}")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}, got {self.init!r}")
        if self.rank < 1:
            raise RankError(f"rank must be >= 1, got {self.rank}")
        if self.orientation == "dpconv" and self.rank != 1:
            raise RankError("dpconv orientation supports rank 1 only")
        if self.learning_rate <= 0:
            raise ValueError(f"learning rate must be positive, got {self.learning_rate}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be positive, got {self.max_iters}")
        if self.tolerance < 0:
            raise ValueError(f"tolerance must be nonnegative, got {self.tolerance}")
        if self.seed < 0:
            raise ValueError(f"seed must be unsigned, got {self.seed}")


def _kernel(K) -> np.ndarray:
    K = np.ascontiguousarray(K, dtype=np.float64)
    if K.ndim != 4 or K.shape[0] != K.shape[1]:
        raise ShapeError(f"kernel must be D×D×M×N, got shape {K.shape}")
    return K


def max_rank(K_shape) -> int:
    D, _, M, _ = K_shape
    return min(D * D, M)


def reconstruct(factors) -> np.ndarray:
    if isinstance(factors, FalconFactors):
        return gep_rank_k(factors)
    if isinstance(factors, DpconvFactors):
        return gep_dpconv(factors)
    raise TypeError(f"cannot reconstruct from {type(factors).__name__}")


def _check_shapes(K, factors):
    if K.shape != factors.kernel_shape:
        raise ShapeError(f"factors describe a {factors.kernel_shape} kernel, got {K.shape}")


def residual(K, factors) -> float:
    """Frobenius norm of ``K - reconstruct(factors)``."""
    K = _kernel(K)
    _check_shapes(K, factors)
    return frobenius_norm(K - reconstruct(factors))


def channel_residuals(K, factors) -> np.ndarray:
    """Residual norm restricted to each output channel n."""
    K = _kernel(K)
    _check_shapes(K, factors)
    R = K - reconstruct(factors)
    return np.array([frobenius_norm(R[:, :, :, n]) for n in range(K.shape[3])])


# --- canonical form -------------------------------------------------------

_UNIT_TOL = 8 * np.finfo(np.float64).eps


def _balance(left, right):
    """Rescale column pairs so norms match, then make left's largest entry positive.

    ``left`` is (rows, C), ``right`` is (C, cols); pair c is (left[:, c], right[c]).
    Pairs with a zero side are left untouched.
    """
    left = left.copy()
    right = right.copy()
    ln = np.linalg.norm(left, axis=0)
    rn = np.linalg.norm(right, axis=1)
    ok = (ln > 0) & (rn > 0)
    c = np.ones_like(ln)
    c[ok] = np.sqrt(rn[ok] / ln[ok])
    c[np.abs(c - 1.0) <= _UNIT_TOL] = 1.0
    left *= c[None, :]
    right /= c[:, None]
    peak = left[np.argmax(np.abs(left), axis=0), np.arange(left.shape[1])]
    flip = ok & (peak < 0)
    left[:, flip] = -left[:, flip]
    right[flip] = -right[flip]
    return left, right


def normalize_factors(f):
    """Fix the (c·D, P/c) gauge and the sign of every factor pair.

    After normalization each depthwise slice and its matching pointwise row
    have equal norms and the largest-magnitude depthwise entry is positive.
    """
    if isinstance(f, FalconFactors):
        D = f.kernel_size
        pw, dw = [], []
        for P, Dk in f.pairs():
            left, right = _balance(Dk.reshape(D * D, -1), P)
            dw.append(left.reshape(Dk.shape))
            pw.append(right)
        return FalconFactors(tuple(pw), tuple(dw))
    if isinstance(f, DpconvFactors):
        D = f.kernel_size
        left, right = _balance(f.depthwise.reshape(D * D, -1), f.pointwise)
        return DpconvFactors(left.reshape(f.depthwise.shape), right)
    raise TypeError(f"cannot normalize {type(f).__name__}")


# --- closed form ----------------------------------------------------------

def _truncated_slices(slices, k):
    """Best rank-k factors of a stack of matrices (C, rows, cols).

    Returns per component r a pair (left (rows, C), right (C, cols)) with the
    singular value split evenly between the two sides.
    """
    U, S, Vt = np.linalg.svd(slices, full_matrices=False)
    root = np.sqrt(S)
    comps = []
    for r in range(k):
        left = (U[:, :, r] * root[:, r, None]).T
        right = Vt[:, r, :] * root[:, r, None]
        comps.append((left, right))
    return comps


def fit_svd(K, k: int = 1) -> FalconFactors:
    """Optimal rank-k FALCON factors via per-output-channel truncated SVD."""
    K = _kernel(K)
    D, _, M, N = K.shape
    if not 1 <= k <= max_rank(K.shape):
        raise RankError(f"rank {k} outside [1, min(D², M)] = [1, {max_rank(K.shape)}]")
    slices = K.transpose(3, 0, 1, 2).reshape(N, D * D, M)
    pw, dw = [], []
    for left, right in _truncated_slices(slices, k):
        dw.append(left.reshape(D, D, N))
        pw.append(right)
    return normalize_factors(FalconFactors(tuple(pw), tuple(dw)))


def _fit_dpconv_svd(K) -> DpconvFactors:
    D, _, M, N = K.shape
    slices = K.transpose(2, 0, 1, 3).reshape(M, D * D, N)
    ((left, right),) = _truncated_slices(slices, 1)
    return normalize_factors(DpconvFactors(left.reshape(D, D, M), right))


def fit_dpconv(K, k: int = 1, method: str = "svd", cfg: FitConfig | None = None) -> DpconvFactors:
    """Rank-1 DPConv factors, unfolding per input channel instead of output channel."""
    K = _kernel(K)
    if k != 1:
        raise RankError(f"DPConv fitting supports rank 1 only, got {k}")
    if method == "svd":
        return _fit_dpconv_svd(K)
    if method == "iterative":
        cfg = replace(cfg or FitConfig(), method="iterative", orientation="dpconv", rank=1)
        return fit_iterative(K, cfg)
    raise ValueError(f"method must be one of {METHODS}, got {method!r}")


# --- gradient-based route -------------------------------------------------

def objective_gradient(K, f):
    """Gradient of ``||reconstruct(f) - K||_F²`` with respect to every factor entry.

    Returned as factors of the same type and shape as ``f``.
    """
    K = _kernel(K)
    _check_shapes(K, f)
    R = reconstruct(f) - K
    if isinstance(f, FalconFactors):
        gD = tuple(2.0 * np.einsum("ijmn,nm->ijn", R, P) for P in f.pointwise)
        gP = tuple(2.0 * np.einsum("ijmn,ijn->nm", R, Dk) for Dk in f.depthwise)
        return FalconFactors(gP, gD)
    gD = 2.0 * np.einsum("ijmn,mn->ijm", R, f.pointwise)
    gP = 2.0 * np.einsum("ijmn,ijm->mn", R, f.depthwise)
    return DpconvFactors(gD, gP)


def _random_init(K, cfg):
    D, _, M, N = K.shape
    rng = np.random.default_rng(cfg.seed)
    scale = frobenius_norm(K) / (D * np.sqrt(M * N))
    if scale == 0:
        scale = 1.0
    if cfg.orientation == "falcon":
        pw, dw = [], []
        for _ in range(cfg.rank):
            pw.append(scale * rng.standard_normal((N, M)))
            dw.append(scale * rng.standard_normal((D, D, N)))
        return FalconFactors(tuple(pw), tuple(dw))
    return DpconvFactors(scale * rng.standard_normal((D, D, M)), scale * rng.standard_normal((M, N)))


def _unpack(f):
    if isinstance(f, FalconFactors):
        return [p.copy() for p in f.pointwise] + [d.copy() for d in f.depthwise]
    return [f.depthwise.copy(), f.pointwise.copy()]


def _pack(params, orientation):
    if orientation == "falcon":
        k = len(params) // 2
        return FalconFactors(tuple(params[:k]), tuple(params[k:]))
    return DpconvFactors(params[0], params[1])


def fit_iterative(K, cfg: FitConfig, history: list | None = None):
    """Fit factors with AdamW, returning the lowest-residual iterate seen.

    Stops after ``cfg.max_iters`` updates or once the relative change of the
    residual between consecutive iterates drops below ``cfg.tolerance``.
    Residuals (starting with the initial one) are appended to ``history``
    when a list is given.
    """
    K = _kernel(K)
    if cfg.orientation == "falcon" and cfg.rank > max_rank(K.shape):
        raise RankError(f"rank {cfg.rank} outside [1, min(D², M)] = [1, {max_rank(K.shape)}]")
    if cfg.init == "warm_svd":
        start = fit_svd(K, cfg.rank) if cfg.orientation == "falcon" else _fit_dpconv_svd(K)
    else:
        start = _random_init(K, cfg)

    params = _unpack(start)
    opt = AdamW(params, lr=cfg.learning_rate, betas=cfg.betas, eps=cfg.eps,
                weight_decay=cfg.weight_decay)
    current = _pack(params, cfg.orientation)
    prev = residual(K, current)
    best, best_res = [p.copy() for p in params], prev
    if history is not None:
        history.append(prev)
    for it in range(1, cfg.max_iters + 1):
        grad = _unpack(objective_gradient(K, current))
        opt.step(grad)
        current = _pack(params, cfg.orientation)
        res = residual(K, current)
        if not np.isfinite(res):
            raise DivergenceError(it, res)
        if history is not None:
            history.append(res)
        if res < best_res:
            best, best_res = [p.copy() for p in params], res
        if res == 0.0 or (prev > 0 and abs(prev - res) / prev < cfg.tolerance):
            log.debug("converged after %d iterations, residual %.6g", it, res)
            break
        prev = res
    return normalize_factors(_pack(best, cfg.orientation))


def fit(K, cfg: FitConfig):
    """Dispatch on ``cfg.method`` and ``cfg.orientation``."""
    if cfg.method == "iterative":
        return fit_iterative(K, cfg)
    if cfg.orientation == "dpconv":
        return fit_dpconv(K, cfg.rank, "svd")
    return fit_svd(K, cfg.rank)
