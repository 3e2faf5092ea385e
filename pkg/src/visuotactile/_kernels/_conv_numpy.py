"""Pure-numpy 2-D convolution kernels (im2col via strided views).

Layouts: input ``(N, C, H, W)``, weight ``(O, C, KH, KW)``, output
``(N, O, HO, WO)``. Zero padding is symmetric.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def output_size(size, k, stride, pad):
    return (size + 2 * pad - k) // stride + 1


def _columns(x, kh, kw, stride, pad):
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))
    # (N, C, HO, WO, KH, KW)
    return win[:, :, ::stride, ::stride]


def conv2d_forward(x, w, b, stride, pad):
    kh, kw = w.shape[2], w.shape[3]
    cols = _columns(x, kh, kw, stride, pad)
    y = np.tensordot(cols, w, axes=([1, 4, 5], [1, 2, 3]))  # (N, HO, WO, O)
    y = y.transpose(0, 3, 1, 2)
    if b is not None:
        y = y + b.reshape(1, -1, 1, 1)
    return np.ascontiguousarray(y, dtype=x.dtype)


def conv2d_backward(x, w, gy, stride, pad):
    n, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    ho, wo = gy.shape[2], gy.shape[3]
    cols = _columns(x, kh, kw, stride, pad)
    gw = np.tensordot(gy, cols, axes=([0, 2, 3], [0, 2, 3]))  # (O, C, KH, KW)
    gb = gy.sum(axis=(0, 2, 3))

    gxp = np.zeros((n, c, h + 2 * pad, wd + 2 * pad), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            contrib = np.tensordot(gy, w[:, :, i, j], axes=([1], [0]))  # (N, HO, WO, C)
            gxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += contrib.transpose(0, 3, 1, 2)
    gx = gxp[:, :, pad:pad + h, pad:pad + wd] if pad else gxp
    return (np.ascontiguousarray(gx, dtype=x.dtype),
            gw.astype(w.dtype, copy=False),
            gb.astype(w.dtype, copy=False))
