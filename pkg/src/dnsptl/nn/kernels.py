"""Convolution data-movement kernels with a compiled fast path.

``BACKEND`` is ``"cython"`` when the extension imported, else ``"numpy"``.
Set ``DNSPTL_PURE_PYTHON=1`` to force the numpy path.
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "numpy"
_ck = None
if not os.environ.get("DNSPTL_PURE_PYTHON"):
    try:
        from . import _ckernels as _ck

        BACKEND = "cython"
    except ImportError:
        _ck = None


def im2col(x: np.ndarray, k: int) -> np.ndarray:
    """(B, H, W, C) -> (B*H*W, k*k*C) patches with zero "same" padding.

    Column order is (kernel row, kernel col, channel), matching a kernel
    tensor of shape (k, k, C_in, C_out) reshaped to (k*k*C_in, C_out).
    """
    if _ck is None:
        return _pykernels.im2col(x, k)
    x = np.ascontiguousarray(x)
    B, H, W, C = x.shape
    out = np.empty((B * H * W, k * k * C), dtype=x.dtype)
    _ck.im2col_into(x, k, out)
    return out


def col2im(cols: np.ndarray, shape, k: int) -> np.ndarray:
    """Adjoint of :func:`im2col`: scatter-add patches back to (B, H, W, C)."""
    if _ck is None:
        return _pykernels.col2im(cols, shape, k)
    out = np.zeros(shape, dtype=cols.dtype)
    _ck.col2im_into(np.ascontiguousarray(cols), k, out)
    return out
