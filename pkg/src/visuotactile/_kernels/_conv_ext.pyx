# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled im2col / col2im convolution kernels.

Same layouts and semantics as ``_conv_numpy``. The gather (im2col) and
scatter-add (col2im) loops run in C; the contractions go through BLAS.
Column layout: rows ``(c, i, j)``, columns ``(n, oy, ox)``.
"""

import numpy as np
cimport numpy as cnp

ctypedef fused real:
    float
    double

cnp.import_array()


def output_size(Py_ssize_t size, Py_ssize_t k, Py_ssize_t stride, Py_ssize_t pad):
    return (size + 2 * pad - k) // stride + 1


cdef void _im2col(const real[:, :, :, ::1] x, real[:, ::1] cols,
                  Py_ssize_t KH, Py_ssize_t KW, Py_ssize_t HO, Py_ssize_t WO,
                  Py_ssize_t stride, Py_ssize_t pad) noexcept nogil:
    cdef Py_ssize_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t n, c, i, j, oy, ox, iy, ix, row, col
    for c in range(C):
        for i in range(KH):
            for j in range(KW):
                row = (c * KH + i) * KW + j
                for n in range(N):
                    for oy in range(HO):
                        iy = oy * stride + i - pad
                        col = (n * HO + oy) * WO
                        if iy < 0 or iy >= H:
                            for ox in range(WO):
                                cols[row, col + ox] = 0
                            continue
                        for ox in range(WO):
                            ix = ox * stride + j - pad
                            if ix < 0 or ix >= W:
                                cols[row, col + ox] = 0
                            else:
                                cols[row, col + ox] = x[n, c, iy, ix]


cdef void _col2im(const real[:, ::1] cols, real[:, :, :, ::1] gx,
                  Py_ssize_t KH, Py_ssize_t KW, Py_ssize_t HO, Py_ssize_t WO,
                  Py_ssize_t stride, Py_ssize_t pad) noexcept nogil:
    cdef Py_ssize_t N = gx.shape[0], C = gx.shape[1], H = gx.shape[2], W = gx.shape[3]
    cdef Py_ssize_t n, c, i, j, oy, ox, iy, ix, row, col
    for c in range(C):
        for i in range(KH):
            for j in range(KW):
                row = (c * KH + i) * KW + j
                for n in range(N):
                    for oy in range(HO):
                        iy = oy * stride + i - pad
                        if iy < 0 or iy >= H:
                            continue
                        col = (n * HO + oy) * WO
                        for ox in range(WO):
                            ix = ox * stride + j - pad
                            if ix >= 0 and ix < W:
                                gx[n, c, iy, ix] += cols[row, col + ox]


def im2col(x, Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t stride, Py_ssize_t pad):
    x = np.ascontiguousarray(x)
    N, C, H, W = x.shape
    HO = (H + 2 * pad - kh) // stride + 1
    WO = (W + 2 * pad - kw) // stride + 1
    cols = np.empty((C * kh * kw, N * HO * WO), dtype=x.dtype)
    if x.dtype == np.float32:
        _im2col[float](x, cols, kh, kw, HO, WO, stride, pad)
    else:
        _im2col[double](x, cols, kh, kw, HO, WO, stride, pad)
    return cols, HO, WO


def col2im(cols, shape, Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t stride, Py_ssize_t pad):
    cols = np.ascontiguousarray(cols)
    N, C, H, W = shape
    HO = (H + 2 * pad - kh) // stride + 1
    WO = (W + 2 * pad - kw) // stride + 1
    gx = np.zeros(shape, dtype=cols.dtype)
    if cols.dtype == np.float32:
        _col2im[float](cols, gx, kh, kw, HO, WO, stride, pad)
    else:
        _col2im[double](cols, gx, kh, kw, HO, WO, stride, pad)
    return gx


def conv2d_forward(x, w, b, Py_ssize_t stride, Py_ssize_t pad):
    O, C, KH, KW = w.shape
    N = x.shape[0]
    cols, HO, WO = im2col(x, KH, KW, stride, pad)
    y = np.dot(w.reshape(O, -1).astype(cols.dtype, copy=False), cols)  # (O, N*HO*WO)
    y = y.reshape(O, N, HO, WO).transpose(1, 0, 2, 3)
    if b is not None:
        y = y + np.asarray(b, dtype=y.dtype).reshape(1, -1, 1, 1)
    return np.ascontiguousarray(y)


def conv2d_backward(x, w, gy, Py_ssize_t stride, Py_ssize_t pad):
    O, C, KH, KW = w.shape
    cols, HO, WO = im2col(x, KH, KW, stride, pad)
    gyf = np.ascontiguousarray(np.asarray(gy, dtype=cols.dtype).transpose(1, 0, 2, 3)).reshape(O, -1)
    gw = np.dot(gyf, cols.T).reshape(w.shape)
    gcols = np.dot(w.reshape(O, -1).T.astype(cols.dtype, copy=False), gyf)
    gx = col2im(gcols, x.shape, KH, KW, stride, pad)
    gb = gyf.sum(axis=1)
    return gx, gw.astype(w.dtype, copy=False), gb.astype(w.dtype, copy=False)
