# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled equilibrium kernels; see _pykernels.py for the reference algorithm."""

from libc.math cimport acos, asin, cos, sin, tan, fabs

import numpy as np
cimport numpy as cnp

cnp.import_array()

SLIDE = 0
EDGE = 1
CORNER_FLANK = 2
FLANK = 3

BACKEND = "cython"


cdef struct Params:
    double c_qq, c_qm, c_mm, L, EI, c_s, x_s, Lm, R, theta_f


cdef struct Terms:
    double theta, phi, arm, g_theta, g_delta, zoff


cdef Params _params(prm) except *:
    cdef Params q
    q.c_qq, q.c_qm, q.c_mm, q.L, q.EI, q.c_s, q.x_s, q.Lm, q.R, q.theta_f = prm
    return q


cdef Terms _terms(int kind, double p, Params* q) nogil:
    cdef Terms t
    cdef double c, a
    if kind == 0:
        t.theta = p
        t.phi = p
        c = cos(p)
        t.arm = q.x_s / c - q.R * tan(p)
        t.zoff = q.R - (q.R - q.x_s * sin(p)) / c
    elif kind == 1:
        t.phi = p
        t.theta = acos((q.x_s - q.R * sin(p)) / q.Lm)
        c = cos(t.phi)
        t.arm = q.Lm * cos(t.phi - t.theta)
        t.zoff = q.R + q.Lm * sin(t.theta) - q.R * c
    elif kind == 2:
        t.theta = p
        t.phi = q.theta_f
        c = cos(t.phi)
        t.arm = q.Lm * cos(t.phi - t.theta)
        t.zoff = q.R + q.Lm * sin(t.theta) + ((q.x_s - q.Lm * cos(t.theta)) * sin(t.phi) - q.R) / c
    else:
        t.theta = q.theta_f
        t.phi = q.theta_f
        c = cos(t.phi)
        t.arm = -p
        t.zoff = q.R - (q.R - q.x_s * sin(t.phi)) / c
        if t.arm < 0.0:
            a = q.L + t.arm
            t.g_theta = c * (a * a / (2.0 * q.EI) + q.c_s * a)
            t.g_delta = c * (a * a * a / (3.0 * q.EI) + a * a * (q.L - a) / (2.0 * q.EI) + q.c_s * a * q.L)
            return t
    t.g_theta = q.c_qm * c + q.c_mm * t.arm
    t.g_delta = q.c_qq * c + q.c_qm * t.arm
    return t


cdef inline double _residual(int kind, double p, double z, Params* q) nogil:
    cdef Terms t = _terms(kind, p, q)
    return t.theta / t.g_theta - (z - t.zoff) / t.g_delta


cdef double _solve(int kind, double z, double lo, double hi, double guess, Params* q,
                   double tol, int maxit, double* r_out, int* it_out) nogil:
    cdef double lo0 = lo, hi0 = hi
    cdef double r_lo, r_hi, p, r, h, pa, pb, slope, p_new
    cdef int it
    cdef bint step_ok
    r_lo = _residual(kind, lo, z, q)
    if r_lo >= 0.0:
        r_out[0] = r_lo
        it_out[0] = 0
        return lo
    r_hi = _residual(kind, hi, z, q)
    if r_hi <= 0.0:
        r_out[0] = r_hi
        it_out[0] = 0
        return hi
    p = guess
    if not (lo < p < hi):
        p = 0.5 * (lo + hi)
    h = 1e-7 * (hi0 - lo0)
    r = _residual(kind, p, z, q)
    for it in range(1, maxit + 1):
        if fabs(r) < tol:
            r_out[0] = r
            it_out[0] = it
            return p
        if r < 0.0:
            lo = p
        else:
            hi = p
        pa = p - h
        pb = p + h
        if pa < lo0:
            pa = p
        if pb > hi0:
            pb = p
        slope = (_residual(kind, pb, z, q) - _residual(kind, pa, z, q)) / (pb - pa)
        step_ok = False
        if slope > 0.0:
            p_new = p - r / slope
            step_ok = lo < p_new < hi
        if not step_ok:
            p_new = 0.5 * (lo + hi)
        if p_new == p or hi - lo <= 4e-16 * (fabs(lo) + fabs(hi)):
            r_out[0] = r
            it_out[0] = it
            return p
        p = p_new
        r = _residual(kind, p, z, q)
    r_out[0] = r
    it_out[0] = maxit
    return p


def branch_terms(int kind, double p, prm):
    cdef Params q = _params(prm)
    cdef Terms t = _terms(kind, p, &q)
    return t.theta, t.phi, t.arm, t.g_theta, t.g_delta, t.zoff


def residual(int kind, double p, double z, prm):
    cdef Params q = _params(prm)
    return _residual(kind, p, z, &q)


def branch_depth(int kind, double p, prm):
    cdef Params q = _params(prm)
    cdef Terms t = _terms(kind, p, &q)
    return t.theta * t.g_delta / t.g_theta + t.zoff


def solve_branch(int kind, double z, double lo, double hi, double guess, prm, double tol, int maxit):
    cdef Params q = _params(prm)
    cdef double r = 0.0
    cdef int it = 0
    cdef double p = _solve(kind, z, lo, hi, guess, &q, tol, maxit, &r, &it)
    return p, r, it, fabs(r) < tol


def solve_sequence(kinds, los, his, zs, prm, double tol, int maxit):
    cdef Params q = _params(prm)
    cdef cnp.int64_t[::1] k_v = np.ascontiguousarray(kinds, dtype=np.int64)
    cdef double[::1] lo_v = np.ascontiguousarray(los, dtype=np.float64)
    cdef double[::1] hi_v = np.ascontiguousarray(his, dtype=np.float64)
    cdef double[::1] z_v = np.ascontiguousarray(zs, dtype=np.float64)
    cdef Py_ssize_t n = z_v.shape[0]
    ps = np.empty(n)
    rs = np.empty(n)
    its = np.empty(n, dtype=np.int64)
    ok = np.empty(n, dtype=np.bool_)
    cdef double[::1] p_v = ps
    cdef double[::1] r_v = rs
    cdef cnp.int64_t[::1] it_v = its
    cdef cnp.npy_bool[::1] ok_v = ok
    cdef Py_ssize_t i
    cdef int kind, prev_kind = -1, it
    cdef double prev_p = 0.0, guess, r, p
    with nogil:
        for i in range(n):
            kind = <int>k_v[i]
            if kind == prev_kind:
                guess = prev_p
            else:
                guess = 0.5 * (lo_v[i] + hi_v[i])
            p = _solve(kind, z_v[i], lo_v[i], hi_v[i], guess, &q, tol, maxit, &r, &it)
            p_v[i] = p
            r_v[i] = r
            it_v[i] = it
            ok_v[i] = fabs(r) < tol
            prev_kind = kind
            prev_p = p
    return ps, rs, its, ok


def edge_angle(double theta, double x_s, double Lm, double R):
    return asin((x_s - Lm * cos(theta)) / R)
