# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled right-hand side and Dormand-Prince step.

Mirrors ``_kernels_py``; descriptor codes come from ``model.FREG_CODES``,
``model.GEXT_CODES`` and ``model.FORCING_CODES``.
"""
from libc.math cimport fabs, pow, sin, sqrt, INFINITY, isfinite

BACKEND = "cython"


cdef inline double fpower(double r, double a) noexcept nogil:
    # r**-a for r > 0; pow() dominates the pair loop, so common exponents skip it
    if a == 1.0:
        return 1.0 / r
    elif a == 2.0:
        return 1.0 / (r * r)
    elif a == 0.5:
        return 1.0 / sqrt(r)
    return pow(r, -a)


cdef inline double fpair(double d, double a, long fk, double p0, double p1) noexcept nogil:
    cdef double v
    if d > 0:
        v = fpower(d, a)
    else:
        v = -fpower(-d, a)
    if fk == 1:
        v += p0 * d
    elif fk == 2:
        v += p0 * d * d * d
    elif fk == 3:
        v += p0 * sin(p1 * d)
    return v


cdef inline double gext(double x, long gk, const double[::1] gp) noexcept nogil:
    if gk == 1:
        return gp[0]
    elif gk == 2:
        return gp[0] * x + gp[1]
    elif gk == 3:
        return gp[0] * sin(gp[1] * x + gp[2])
    return 0.0


cdef void rhs(double t, const double[::1] x, const double[::1] b, double a,
              long fk, const double[::1] fp, long gk, const double[::1] gp,
              int reduced, const long[::1] fkind, const double[:, ::1] fparams,
              double[::1] out) noexcept nogil:
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, j
    cdef double w, p0 = fp[0], p1 = fp[1]
    for i in range(n):
        out[i] = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            w = b[i] * b[j] * fpair(x[i] - x[j], a, fk, p0, p1)
            out[i] += w
            out[j] -= w
    if reduced:
        for i in range(n):
            if fkind[i] == 1:
                out[i] += fparams[i, 0]
            elif fkind[i] == 2:
                out[i] += fparams[i, 0] * sin(fparams[i, 1] * t + fparams[i, 2])
    else:
        for i in range(n):
            out[i] += b[i] * gext(x[i], gk, gp)


def velocity(double t, const double[::1] x, const double[::1] b, double a,
             long fk, const double[::1] fp, long gk, const double[::1] gp,
             int reduced, const long[::1] fkind, const double[:, ::1] fparams,
             double[::1] out):
    rhs(t, x, b, a, fk, fp, gk, gp, reduced, fkind, fparams, out)


# Dormand-Prince 5(4) tableau.
cdef double C2 = 1.0 / 5.0
cdef double C3 = 3.0 / 10.0
cdef double C4 = 4.0 / 5.0
cdef double C5 = 8.0 / 9.0
cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0
cdef double A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0
cdef double A42 = -56.0 / 15.0
cdef double A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0
cdef double A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0
cdef double A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0
cdef double A62 = -355.0 / 33.0
cdef double A63 = 46732.0 / 5247.0
cdef double A64 = 49.0 / 176.0
cdef double A65 = -5103.0 / 18656.0
cdef double B1 = 35.0 / 384.0
cdef double B3 = 500.0 / 1113.0
cdef double B4 = 125.0 / 192.0
cdef double B5 = -2187.0 / 6784.0
cdef double B6 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0
cdef double E3 = -71.0 / 16695.0
cdef double E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0
cdef double E6 = 22.0 / 525.0
cdef double E7 = -1.0 / 40.0


cdef double _dopri(double t, double h, const double[::1] x, const double[::1] k1,
                   const double[::1] b, double a,
                   long fk, const double[::1] fp, long gk, const double[::1] gp,
                   int reduced, const long[::1] fkind, const double[:, ::1] fparams,
                   double rtol, double atol,
                   double[::1] k2, double[::1] k3, double[::1] k4, double[::1] k5,
                   double[::1] k6, double[::1] ytmp,
                   double[::1] y_out, double[::1] k_out) noexcept nogil:
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i
    cdef double err, scale, d, e, norm = 0.0
    for i in range(n):
        ytmp[i] = x[i] + h * A21 * k1[i]
    rhs(t + C2 * h, ytmp, b, a, fk, fp, gk, gp, reduced, fkind, fparams, k2)
    for i in range(n):
        ytmp[i] = x[i] + h * (A31 * k1[i] + A32 * k2[i])
    rhs(t + C3 * h, ytmp, b, a, fk, fp, gk, gp, reduced, fkind, fparams, k3)
    for i in range(n):
        ytmp[i] = x[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
    rhs(t + C4 * h, ytmp, b, a, fk, fp, gk, gp, reduced, fkind, fparams, k4)
    for i in range(n):
        ytmp[i] = x[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
    rhs(t + C5 * h, ytmp, b, a, fk, fp, gk, gp, reduced, fkind, fparams, k5)
    for i in range(n):
        ytmp[i] = x[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
    rhs(t + h, ytmp, b, a, fk, fp, gk, gp, reduced, fkind, fparams, k6)
    for i in range(n):
        y_out[i] = x[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
    rhs(t + h, y_out, b, a, fk, fp, gk, gp, reduced, fkind, fparams, k_out)
    for i in range(n):
        e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k_out[i])
        d = INFINITY
        if i > 0:
            d = x[i] - x[i - 1]
            if y_out[i] - y_out[i - 1] < d:
                d = y_out[i] - y_out[i - 1]
        if i < n - 1:
            if x[i + 1] - x[i] < d:
                d = x[i + 1] - x[i]
            if y_out[i + 1] - y_out[i] < d:
                d = y_out[i + 1] - y_out[i]
        if n == 1:
            d = fabs(x[0])
            if d < 1.0:
                d = 1.0
        if d <= 0:
            return INFINITY
        scale = atol + rtol * d
        err = fabs(e) / scale
        if not isfinite(err) or not isfinite(y_out[i]):
            return INFINITY
        if err > norm:
            norm = err
    return norm


def dopri_step(double t, double h, const double[::1] x, const double[::1] k1,
               const double[::1] b, double a,
               long fk, const double[::1] fp, long gk, const double[::1] gp,
               int reduced, const long[::1] fkind, const double[:, ::1] fparams,
               double rtol, double atol, double[:, ::1] work,
               double[::1] y_out, double[::1] k_out):
    """One trial step; returns the scaled error norm (``<= 1`` means acceptable)."""
    cdef double norm
    with nogil:
        norm = _dopri(t, h, x, k1, b, a, fk, fp, gk, gp, reduced, fkind, fparams,
                      rtol, atol, work[0], work[1], work[2], work[3], work[4], work[5],
                      y_out, k_out)
    return norm


def rk4_run(double t0, double h, Py_ssize_t nsteps, const double[::1] x0,
            const double[::1] b, double a,
            long fk, const double[::1] fp, long gk, const double[::1] gp,
            int reduced, const long[::1] fkind, const double[:, ::1] fparams,
            double[:, ::1] work, double[:, ::1] out):
    """Classical RK4 with fixed ``h``; row ``s`` of ``out`` holds the state at ``t0 + s*h``.

    Returns the first step index whose result is not strictly ordered, or -1.
    """
    cdef Py_ssize_t n = x0.shape[0]
    cdef Py_ssize_t s, i
    cdef double t
    cdef double[::1] k1 = work[0]
    cdef double[::1] k2 = work[1]
    cdef double[::1] k3 = work[2]
    cdef double[::1] k4 = work[3]
    cdef double[::1] ytmp = work[4]
    cdef Py_ssize_t bad = -1
    with nogil:
        for i in range(n):
            out[0, i] = x0[i]
        for s in range(nsteps):
            t = t0 + s * h
            rhs(t, out[s], b, a, fk, fp, gk, gp, reduced, fkind, fparams, k1)
            for i in range(n):
                ytmp[i] = out[s, i] + 0.5 * h * k1[i]
            rhs(t + 0.5 * h, ytmp, b, a, fk, fp, gk, gp, reduced, fkind, fparams, k2)
            for i in range(n):
                ytmp[i] = out[s, i] + 0.5 * h * k2[i]
            rhs(t + 0.5 * h, ytmp, b, a, fk, fp, gk, gp, reduced, fkind, fparams, k3)
            for i in range(n):
                ytmp[i] = out[s, i] + h * k3[i]
            rhs(t + h, ytmp, b, a, fk, fp, gk, gp, reduced, fkind, fparams, k4)
            for i in range(n):
                out[s + 1, i] = out[s, i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            for i in range(n - 1):
                if not (out[s + 1, i + 1] > out[s + 1, i]):
                    bad = s + 1
                    break
            if bad >= 0:
                break
    return bad
