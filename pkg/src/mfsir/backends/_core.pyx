# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pairwise-interaction kernels.

Hot loops of the particle simulator: mean-field drift sums and infection-rate
sums over infected neighbours.  All reductions run in a fixed deterministic
order so repeated runs are bit-identical.  `numpy_backend` provides the same
interface in pure NumPy.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp

NAME = "cython"

# family codes shared with the Python layer (see mfsir.model)
DEF KERNEL_CONSTANT = 0
DEF KERNEL_GAUSSIAN = 1
DEF KERNEL_BUMP = 2

DEF DRIFT_ZERO = 0
DEF DRIFT_SATURATING = 1
DEF DRIFT_STATE_MODULATED = 2


cdef inline double _kernel_val(int family, double beta, double inv2l2,
                               double inv_r2, double r2) noexcept nogil:
    # r2 = squared distance; inv2l2 = 1/(2 ell^2); inv_r2 = 1/radius^2
    cdef double u2
    if family == KERNEL_CONSTANT:
        return beta
    elif family == KERNEL_GAUSSIAN:
        return beta * exp(-r2 * inv2l2)
    else:
        u2 = r2 * inv_r2
        if u2 >= 1.0:
            return 0.0
        return beta * exp(1.0 - 1.0 / (1.0 - u2))


def infection_load_1d(double[::1] x, signed char[::1] states,
                      int family, double beta, double scale,
                      double[::1] out):
    """out[i] = sum_{j infected} K(x_i, x_j) for susceptible i, else 0.

    `scale` is the kernel length (gaussian) or support radius (bump).
    The caller divides by N.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, j, m
    cdef double xi, r, s
    cdef double inv2l2 = 0.0, inv_r2 = 0.0
    if family == KERNEL_GAUSSIAN:
        inv2l2 = 0.5 / (scale * scale)
    elif family == KERNEL_BUMP:
        inv_r2 = 1.0 / (scale * scale)

    # gather infected positions once; loop over them contiguously
    xs = np.empty(n, dtype=np.float64)
    cdef double[::1] xinf = xs
    m = 0
    for j in range(n):
        if states[j] == 1:
            xinf[m] = x[j]
            m += 1

    for i in range(n):
        if states[i] != 0:
            out[i] = 0.0
            continue
        xi = x[i]
        s = 0.0
        for j in range(m):
            r = xi - xinf[j]
            s += _kernel_val(family, beta, inv2l2, inv_r2, r * r)
        out[i] = s


def infection_load_nd(double[:, ::1] x, signed char[::1] states,
                      int family, double beta, double scale,
                      double[::1] out):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t i, j, k, m
    cdef double r, r2, s
    cdef double inv2l2 = 0.0, inv_r2 = 0.0
    if family == KERNEL_GAUSSIAN:
        inv2l2 = 0.5 / (scale * scale)
    elif family == KERNEL_BUMP:
        inv_r2 = 1.0 / (scale * scale)

    xs = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] xinf = xs
    m = 0
    for j in range(n):
        if states[j] == 1:
            for k in range(d):
                xinf[m, k] = x[j, k]
            m += 1

    for i in range(n):
        if states[i] != 0:
            out[i] = 0.0
            continue
        s = 0.0
        for j in range(m):
            r2 = 0.0
            for k in range(d):
                r = x[i, k] - xinf[j, k]
                r2 += r * r
            s += _kernel_val(family, beta, inv2l2, inv_r2, r2)
        out[i] = s


def drift_sum_1d(double[::1] x, signed char[::1] states,
                 int family, double a, double ell, double[:, ::1] w,
                 double[::1] out):
    """out[i] = sum_j V(x_i, e_i, x_j, e_j) (caller divides by N).

    The saturating family is antisymmetric and state-independent, so each
    pair is visited once; the (i, j) visit order is fixed.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, j
    cdef double xi, r, v, acc
    cdef double inv_l2
    if family == DRIFT_ZERO:
        for i in range(n):
            out[i] = 0.0
        return
    inv_l2 = 1.0 / (ell * ell)
    for i in range(n):
        out[i] = 0.0
    if family == DRIFT_SATURATING:
        for i in range(n):
            xi = x[i]
            acc = 0.0
            for j in range(i + 1, n):
                r = x[j] - xi
                v = a * r / (1.0 + r * r * inv_l2)
                acc += v
                out[j] -= v
            out[i] += acc
    else:
        for i in range(n):
            xi = x[i]
            acc = 0.0
            for j in range(n):
                r = x[j] - xi
                acc += w[states[i], states[j]] * a * r / (1.0 + r * r * inv_l2)
            out[i] = acc


def drift_sum_nd(double[:, ::1] x, signed char[::1] states,
                 int family, double a, double ell, double[:, ::1] w,
                 double[:, ::1] out):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double r2, r, c, wij
    cdef double inv_l2
    if family == DRIFT_ZERO:
        for i in range(n):
            for k in range(d):
                out[i, k] = 0.0
        return
    inv_l2 = 1.0 / (ell * ell)
    for i in range(n):
        for k in range(d):
            out[i, k] = 0.0
    if family == DRIFT_SATURATING:
        for i in range(n):
            for j in range(i + 1, n):
                r2 = 0.0
                for k in range(d):
                    r = x[j, k] - x[i, k]
                    r2 += r * r
                c = a / (1.0 + r2 * inv_l2)
                for k in range(d):
                    r = (x[j, k] - x[i, k]) * c
                    out[i, k] += r
                    out[j, k] -= r
    else:
        for i in range(n):
            for j in range(n):
                r2 = 0.0
                for k in range(d):
                    r = x[j, k] - x[i, k]
                    r2 += r * r
                wij = w[states[i], states[j]]
                c = wij * a / (1.0 + r2 * inv_l2)
                for k in range(d):
                    out[i, k] += (x[j, k] - x[i, k]) * c


def kernel_field_1d(double[::1] targets, double[::1] sources,
                    double[::1] weights, int family, double beta,
                    double scale, double[::1] out):
    """out[i] = sum_j weights[j] * K(targets[i], sources[j])."""
    cdef Py_ssize_t nt = targets.shape[0]
    cdef Py_ssize_t ns = sources.shape[0]
    cdef Py_ssize_t i, j
    cdef double r, s
    cdef double inv2l2 = 0.0, inv_r2 = 0.0
    if family == KERNEL_GAUSSIAN:
        inv2l2 = 0.5 / (scale * scale)
    elif family == KERNEL_BUMP:
        inv_r2 = 1.0 / (scale * scale)
    for i in range(nt):
        s = 0.0
        for j in range(ns):
            r = targets[i] - sources[j]
            s += weights[j] * _kernel_val(family, beta, inv2l2, inv_r2, r * r)
        out[i] = s


def drift_field_1d(double[::1] targets, signed char e,
                   double[::1] sources, signed char[::1] source_states,
                   double[::1] weights, int family, double a, double ell,
                   double[:, ::1] w, double[::1] out):
    """out[i] = sum_j weights[j] * V(targets[i], e, sources[j], f_j)."""
    cdef Py_ssize_t nt = targets.shape[0]
    cdef Py_ssize_t ns = sources.shape[0]
    cdef Py_ssize_t i, j
    cdef double r, s, inv_l2
    if family == DRIFT_ZERO:
        for i in range(nt):
            out[i] = 0.0
        return
    inv_l2 = 1.0 / (ell * ell)
    for i in range(nt):
        s = 0.0
        if family == DRIFT_SATURATING:
            for j in range(ns):
                r = sources[j] - targets[i]
                s += weights[j] * a * r / (1.0 + r * r * inv_l2)
        else:
            for j in range(ns):
                r = sources[j] - targets[i]
                s += weights[j] * w[e, source_states[j]] * a * r / (1.0 + r * r * inv_l2)
        out[i] = s
