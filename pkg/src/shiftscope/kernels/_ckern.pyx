# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled dense-chain kernels.

Same contract as `_pykern`: float64 C-contiguous arrays in, (pre, post,
logits) / (d_weights, d_biases, d_input) out. Matrices here are small
(typical widths <= 64), so naive typed loops beat the per-call overhead of
BLAS dispatch.
"""

from libc.math cimport tanh

import numpy as np

cimport numpy as cnp

cnp.import_array()

ACT_RELU = 0
ACT_TANH = 1


cdef void _affine(double[:, ::1] a, double[:, ::1] w, double[::1] b,
                  double[:, ::1] out) noexcept nogil:
    # out = a @ w + b; i-k-j order keeps w and out rows unit-stride
    cdef Py_ssize_t n = a.shape[0], m = a.shape[1], p = w.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double aik
    for i in range(n):
        for j in range(p):
            out[i, j] = b[j]
        for k in range(m):
            aik = a[i, k]
            for j in range(p):
                out[i, j] += aik * w[k, j]


cdef void _matmul_tn(double[:, ::1] a, double[:, ::1] g,
                     double[:, ::1] out) noexcept nogil:
    # out = a.T @ g; k-i-j order keeps g and out rows unit-stride
    cdef Py_ssize_t n = a.shape[0], m = a.shape[1], p = g.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double aki
    for i in range(m):
        for j in range(p):
            out[i, j] = 0.0
    for k in range(n):
        for i in range(m):
            aki = a[k, i]
            for j in range(p):
                out[i, j] += aki * g[k, j]


cdef void _matmul_nt(double[:, ::1] g, double[:, ::1] w,
                     double[:, ::1] out) noexcept nogil:
    # out = g @ w.T; contiguous dot products along k
    cdef Py_ssize_t n = g.shape[0], p = g.shape[1], m = w.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(p):
                acc += g[i, k] * w[j, k]
            out[i, j] = acc


def forward_chain(weights, biases, x, activation, skips):
    cdef int act = activation
    cdef bint with_skip
    cdef Py_ssize_t i, j, li, n_hidden = len(weights) - 1
    cdef double[:, ::1] h = x
    cdef double[:, ::1] z_mv, h_mv, prev_mv
    pre = []
    post = []
    for li in range(n_hidden):
        z = np.empty((h.shape[0], (<object> weights[li]).shape[1]))
        z_mv = z
        _affine(h, weights[li], biases[li], z_mv)
        hh = np.empty_like(z)
        h_mv = hh
        with_skip = skips[li]
        if act == 0:
            for i in range(z_mv.shape[0]):
                for j in range(z_mv.shape[1]):
                    h_mv[i, j] = z_mv[i, j] if z_mv[i, j] > 0.0 else 0.0
        else:
            for i in range(z_mv.shape[0]):
                for j in range(z_mv.shape[1]):
                    h_mv[i, j] = tanh(z_mv[i, j])
        if with_skip:
            prev_mv = h
            for i in range(h_mv.shape[0]):
                for j in range(h_mv.shape[1]):
                    h_mv[i, j] += prev_mv[i, j]
        pre.append(z)
        post.append(hh)
        h = h_mv
    logits = np.empty((h.shape[0], (<object> weights[n_hidden]).shape[1]))
    z_mv = logits
    _affine(h, weights[n_hidden], biases[n_hidden], z_mv)
    return pre, post, logits


def backward_chain(weights, pre, post, x, d_logits, d_penultimate, activation,
                   skips, want_input_grad):
    cdef int act = activation
    cdef bint with_skip
    cdef Py_ssize_t n_layers = len(weights)
    cdef Py_ssize_t n_hidden = n_layers - 1
    cdef Py_ssize_t i, j, li
    cdef double[:, ::1] g_mv, gh_mv, gz_mv, z_mv, h_mv, a_mv, gnew_mv

    d_w = [None] * n_layers
    d_b = [None] * n_layers

    a_last = post[n_hidden - 1] if n_hidden else x
    dw = np.empty(((<object> weights[n_hidden]).shape[0],
                   (<object> weights[n_hidden]).shape[1]))
    _matmul_tn(a_last, d_logits, dw)
    d_w[n_hidden] = dw
    d_b[n_hidden] = np.asarray(d_logits).sum(axis=0)

    gh = np.empty((d_logits.shape[0], (<object> weights[n_hidden]).shape[0]))
    gh_mv = gh
    _matmul_nt(d_logits, weights[n_hidden], gh_mv)
    if d_penultimate is not None:
        g_mv = d_penultimate
        for i in range(gh_mv.shape[0]):
            for j in range(gh_mv.shape[1]):
                gh_mv[i, j] += g_mv[i, j]

    for li in range(n_hidden - 1, -1, -1):
        with_skip = skips[li]
        gz = np.empty_like(gh)
        gz_mv = gz
        z_mv = pre[li]
        if act == 0:
            for i in range(gz_mv.shape[0]):
                for j in range(gz_mv.shape[1]):
                    gz_mv[i, j] = gh_mv[i, j] if z_mv[i, j] > 0.0 else 0.0
        else:
            h_mv = post[li]
            if with_skip:
                a_mv = post[li - 1] if li > 0 else x
                for i in range(gz_mv.shape[0]):
                    for j in range(gz_mv.shape[1]):
                        gz_mv[i, j] = gh_mv[i, j] * (
                            1.0 - (h_mv[i, j] - a_mv[i, j])
                            * (h_mv[i, j] - a_mv[i, j]))
            else:
                for i in range(gz_mv.shape[0]):
                    for j in range(gz_mv.shape[1]):
                        gz_mv[i, j] = gh_mv[i, j] * (
                            1.0 - h_mv[i, j] * h_mv[i, j])
        a_in = post[li - 1] if li > 0 else x
        dw = np.empty(((<object> weights[li]).shape[0],
                       (<object> weights[li]).shape[1]))
        _matmul_tn(a_in, gz, dw)
        d_w[li] = dw
        d_b[li] = gz.sum(axis=0)
        if li > 0 or want_input_grad:
            gnew = np.empty((gz_mv.shape[0], (<object> weights[li]).shape[0]))
            gnew_mv = gnew
            _matmul_nt(gz, weights[li], gnew_mv)
            if with_skip:
                for i in range(gnew_mv.shape[0]):
                    for j in range(gnew_mv.shape[1]):
                        gnew_mv[i, j] += gh_mv[i, j]
            gh = gnew
            gh_mv = gnew_mv

    d_input = gh if want_input_grad else None
    return d_w, d_b, d_input
