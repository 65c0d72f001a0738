"""Backend selection for the convolution kernels.

The compiled Cython module is used when it was built; otherwise the numpy
fallback is. Set ``FALCONTK_BACKEND=python`` to force the fallback. Both
backends are importable directly (``compiled`` is None when unavailable)
so they can be compared against each other.
"""
import os

from . import _pykernels as python

try:
    from . import _ckernels as compiled
except ImportError:  # extension not built
    compiled = None

if compiled is not None and os.environ.get("FALCONTK_BACKEND", "").lower() != "python":
    backend = compiled
    BACKEND = "cython"
else:
    backend = python
    BACKEND = "python"

conv2d = backend.conv2d
depthwise = backend.depthwise
pointwise = backend.pointwise

__all__ = ["BACKEND", "compiled", "python", "conv2d", "depthwise", "pointwise"]
