# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled MLP kernels.

Same contract as the numpy reference in ``_mlp_np``: flat parameter vector,
per-layer layout weight(d_in, d_out) then bias(d_out), tanh/relu hidden
activations, linear output head. Matrix products go through BLAS dgemm;
bias, activations and their derivatives are fused C loops. The win over the
numpy path is dispatch overhead, which dominates at the batch sizes this
library runs at.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport tanh as ctanh
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

ACT_TANH = 0
ACT_RELU = 1

# below this many elements, scalar libm tanh beats a numpy ufunc call
DEF TANH_SCALAR_MAX = 128


def n_params(dims) -> int:
    return int(sum(dims[l] * dims[l + 1] + dims[l + 1] for l in range(len(dims) - 1)))


cdef void _matmul(const double* a, const double* b, double* c,
                  int m, int k, int n) noexcept nogil:
    # c (m,n) = a (m,k) @ b (k,n), all row-major
    cdef double one = 1.0, zero = 0.0
    dgemm("N", "N", &n, &m, &k, &one, b, &n, a, &k, &zero, c, &n)


cdef void _add_bias(double* z, const double* b, Py_ssize_t batch, Py_ssize_t dout) noexcept nogil:
    cdef Py_ssize_t i, k
    for i in range(batch):
        for k in range(dout):
            z[i * dout + k] += b[k]


cdef void _relu_inplace(double* z, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        if z[i] < 0.0:
            z[i] = 0.0


cdef void _tanh_scalar(double* z, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        z[i] = ctanh(z[i])


cdef _activate(cnp.ndarray[double, ndim=2, mode="c"] z, int act):
    cdef Py_ssize_t n = z.shape[0] * z.shape[1]
    if act == 1:
        _relu_inplace(<double*> z.data, n)
    elif n <= TANH_SCALAR_MAX:
        _tanh_scalar(<double*> z.data, n)
    else:
        np.tanh(z, out=z)


def mlp_forward(double[::1] params, dims, int act, x):
    cdef cnp.ndarray[double, ndim=2, mode="c"] a = np.ascontiguousarray(x, dtype=np.float64)
    cdef long[::1] d = np.asarray(dims, dtype=np.int64)
    cdef Py_ssize_t nlayers = d.shape[0] - 1
    cdef Py_ssize_t batch = a.shape[0]
    cdef Py_ssize_t l, off = 0
    cdef cnp.ndarray[double, ndim=2, mode="c"] z
    for l in range(nlayers):
        z = np.empty((batch, d[l + 1]), dtype=np.float64)
        with nogil:
            _matmul(<const double*> a.data, &params[off], <double*> z.data,
                    <int> batch, <int> d[l], <int> d[l + 1])
            _add_bias(<double*> z.data, &params[off + d[l] * d[l + 1]], batch, d[l + 1])
        if l < nlayers - 1:
            _activate(z, act)
        off += d[l] * d[l + 1] + d[l + 1]
        a = z
    return a


def mlp_vjp(double[::1] params, dims, int act, x, gy, bint need_gx=False):
    cdef long[::1] d = np.asarray(dims, dtype=np.int64)
    cdef Py_ssize_t nlayers = d.shape[0] - 1
    cdef cnp.ndarray[double, ndim=2, mode="c"] x_arr = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] g = np.array(gy, dtype=np.float64, order="C")
    cdef Py_ssize_t batch = x_arr.shape[0]

    # forward pass, keeping every activation
    acts = [x_arr]
    cdef cnp.ndarray[double, ndim=2, mode="c"] cur = x_arr
    cdef cnp.ndarray[double, ndim=2, mode="c"] z
    cdef Py_ssize_t l, off = 0
    offsets = []
    for l in range(nlayers):
        offsets.append(off)
        z = np.empty((batch, d[l + 1]), dtype=np.float64)
        with nogil:
            _matmul(<const double*> cur.data, &params[off], <double*> z.data,
                    <int> batch, <int> d[l], <int> d[l + 1])
            _add_bias(<double*> z.data, &params[off + d[l] * d[l + 1]], batch, d[l + 1])
        if l < nlayers - 1:
            _activate(z, act)
        off += d[l] * d[l + 1] + d[l + 1]
        acts.append(z)
        cur = z

    cdef cnp.ndarray[double, ndim=1, mode="c"] grad = np.zeros(params.shape[0], dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] a_prev, gprev, h
    cdef double* gbuf
    cdef double* gb
    cdef const double* w
    cdef double one = 1.0, zero = 0.0
    cdef double hv
    cdef Py_ssize_t i, j, n
    cdef int din, dout, nb
    for l in range(nlayers - 1, -1, -1):
        a_prev = acts[l]
        din = <int> d[l]
        dout = <int> d[l + 1]
        nb = <int> batch
        off = offsets[l]
        w = &params[off]
        gbuf = <double*> g.data
        with nogil:
            # weight gradient: a_prev^T @ g, written straight into the flat grad
            dgemm("N", "T", &dout, &din, &nb, &one, gbuf, &dout,
                  <const double*> a_prev.data, &din, &zero,
                  <double*> grad.data + off, &dout)
            # bias gradient: column sums of g
            gb = <double*> grad.data + off + din * dout
            for i in range(batch):
                for j in range(dout):
                    gb[j] += gbuf[i * dout + j]
        if l > 0 or need_gx:
            gprev = np.empty((batch, din), dtype=np.float64)
            h = acts[l]
            with nogil:
                # g @ W^T, then the activation derivative of the layer below
                dgemm("T", "N", &din, &nb, &dout, &one, w, &dout, gbuf, &dout,
                      &zero, <double*> gprev.data, &din)
                if l > 0:
                    n = batch * din
                    if act == 0:
                        for i in range(n):
                            hv = (<const double*> h.data)[i]
                            (<double*> gprev.data)[i] *= 1.0 - hv * hv
                    else:
                        for i in range(n):
                            if (<const double*> h.data)[i] <= 0.0:
                                (<double*> gprev.data)[i] = 0.0
            g = gprev
    return grad, (g if need_gx else None)
