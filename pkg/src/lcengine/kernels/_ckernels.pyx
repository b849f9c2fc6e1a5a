# cython: boundscheck=False, wraparound=False, cdivision=True
# Compiled aggregation kernels.  Per-cell operation order must stay in sync
# with numpy_backend.py: multiply then add, convolution taps in ascending k
# order.  Built with -ffp-contract=off so no FMA contraction sneaks in.


def add_const(double[:, ::1] acc, double c):
    cdef Py_ssize_t i, j
    cdef Py_ssize_t n_s = acc.shape[0], n_t = acc.shape[1]
    with nogil:
        for i in range(n_s):
            for j in range(n_t):
                acc[i, j] = acc[i, j] + c


def add_scaled(double[:, ::1] acc, double c, const double[:, ::1] x):
    cdef Py_ssize_t i, j
    cdef Py_ssize_t n_s = acc.shape[0], n_t = acc.shape[1]
    with nogil:
        for i in range(n_s):
            for j in range(n_t):
                acc[i, j] = acc[i, j] + c * x[i, j]


def add_product(double[:, ::1] acc, const double[:, ::1] u, const double[:, ::1] x):
    cdef Py_ssize_t i, j
    cdef Py_ssize_t n_s = acc.shape[0], n_t = acc.shape[1]
    with nogil:
        for i in range(n_s):
            for j in range(n_t):
                acc[i, j] = acc[i, j] + u[i, j] * x[i, j]


def convolve_rows_into(double[:, ::1] out, const double[:, ::1] em, const double[::1] kern):
    cdef Py_ssize_t s, k, t
    cdef Py_ssize_t n_s = em.shape[0], n_t = em.shape[1], n_k = kern.shape[0]
    cdef double c
    with nogil:
        for s in range(n_s):
            for k in range(n_k):
                c = kern[k]
                for t in range(n_t):
                    out[s, k + t] = out[s, k + t] + c * em[s, t]
