"""Compiled im2col / col2im for stride-1 "same" convolution on NHWC tensors."""

cimport cython

ctypedef fused floating_t:
    float
    double


@cython.boundscheck(False)
@cython.wraparound(False)
def im2col_into(const floating_t[:, :, :, ::1] x, int k, floating_t[:, ::1] out):
    cdef Py_ssize_t B = x.shape[0], H = x.shape[1], W = x.shape[2], C = x.shape[3]
    cdef Py_ssize_t pad = k // 2
    cdef Py_ssize_t b, h, w, i, j, c, hh, ww, row, col
    with nogil:
        for b in range(B):
            for h in range(H):
                for w in range(W):
                    row = (b * H + h) * W + w
                    col = 0
                    for i in range(k):
                        hh = h + i - pad
                        for j in range(k):
                            ww = w + j - pad
                            if hh >= 0 and hh < H and ww >= 0 and ww < W:
                                for c in range(C):
                                    out[row, col + c] = x[b, hh, ww, c]
                            else:
                                for c in range(C):
                                    out[row, col + c] = 0
                            col = col + C


@cython.boundscheck(False)
@cython.wraparound(False)
def col2im_into(const floating_t[:, ::1] cols, int k, floating_t[:, :, :, ::1] out):
    """Scatter-add columns back onto ``out``, which must be zero on entry."""
    cdef Py_ssize_t B = out.shape[0], H = out.shape[1], W = out.shape[2], C = out.shape[3]
    cdef Py_ssize_t pad = k // 2
    cdef Py_ssize_t b, h, w, i, j, c, hh, ww, row, col
    with nogil:
        for b in range(B):
            for h in range(H):
                for w in range(W):
                    row = (b * H + h) * W + w
                    col = 0
                    for i in range(k):
                        hh = h + i - pad
                        for j in range(k):
                            ww = w + j - pad
                            if hh >= 0 and hh < H and ww >= 0 and ww < W:
                                for c in range(C):
                                    out[b, hh, ww, c] += cols[row, col + c]
                            col = col + C
