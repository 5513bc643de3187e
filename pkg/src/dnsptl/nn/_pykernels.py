"""Pure numpy im2col / col2im, used when the compiled extension is absent."""

import numpy as np


def im2col(x: np.ndarray, k: int) -> np.ndarray:
    B, H, W, C = x.shape
    p = k // 2
    xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
    cols = np.empty((B, H, W, k, k, C), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, :, :, i, j, :] = xp[:, i:i + H, j:j + W, :]
    return cols.reshape(B * H * W, k * k * C)


def col2im(cols: np.ndarray, shape, k: int) -> np.ndarray:
    B, H, W, C = shape
    p = k // 2
    cols = cols.reshape(B, H, W, k, k, C)
    xp = np.zeros((B, H + 2 * p, W + 2 * p, C), dtype=cols.dtype)
    for i in range(k):
        for j in range(k):
            xp[:, i:i + H, j:j + W, :] += cols[:, :, :, i, j, :]
    return np.ascontiguousarray(xp[:, p:p + H, p:p + W, :])
