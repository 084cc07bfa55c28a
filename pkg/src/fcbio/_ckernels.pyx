# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``; identical signatures."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

cnp.import_array()

BACKEND = "compiled"


cdef inline double _dot(const double[::1] a, const double[::1] b) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


cdef void _project_ball(const double[::1] z, const double[::1] c, double R,
                        double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, n = z.shape[0]
    cdef double nrm = 0.0, d, s
    for i in range(n):
        d = z[i] - c[i]
        nrm += d * d
    nrm = sqrt(nrm)
    if nrm <= R:
        for i in range(n):
            out[i] = z[i]
    else:
        s = R / nrm
        for i in range(n):
            out[i] = c[i] + s * (z[i] - c[i])


cdef int _project_ball_hyperplane(const double[::1] z, const double[::1] c, double R,
                                  const double[::1] w, double b, double tol,
                                  double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, j, n = z.shape[0]
    cdef double ww = _dot(w, w)
    cdef double sc, dist2, slack, sz, dz2, r, nd, ne, wi, e
    if ww == 0.0:
        return 1
    sc = (_dot(w, c) + b) / ww
    dist2 = sc * sc * ww
    slack = R + tol * (R if R > 1.0 else 1.0)
    if dist2 > slack * slack:
        return 1
    sz = (_dot(w, z) + b) / ww
    dz2 = 0.0
    for i in range(n):
        out[i] = z[i] - sz * w[i]
        dz2 += (out[i] - c[i]) * (out[i] - c[i])
    if dz2 <= R * R:
        return 0
    r = R * R - dist2
    r = sqrt(r) if r > 0.0 else 0.0
    # out currently holds zh; convert to ch + r * (zh - ch) / |zh - ch|
    nd = 0.0
    for i in range(n):
        e = out[i] - (c[i] - sc * w[i])
        nd += e * e
    nd = sqrt(nd)
    if nd > 0.0:
        for i in range(n):
            out[i] = (c[i] - sc * w[i]) + (r / nd) * (out[i] - (c[i] - sc * w[i]))
        return 0
    for j in range(n):
        wi = w[j] / ww
        ne = 0.0
        for i in range(n):
            e = -wi * w[i]
            if i == j:
                e += 1.0
            ne += e * e
        ne = sqrt(ne)
        if ne > 1e-12:
            for i in range(n):
                e = -wi * w[i]
                if i == j:
                    e += 1.0
                out[i] = (c[i] - sc * w[i]) + (r / ne) * e
            return 2
    for i in range(n):
        out[i] = c[i] - sc * w[i]
    return 2


def project_ball(const double[::1] z, const double[::1] c, double R):
    out = np.empty(z.shape[0])
    _project_ball(z, c, R, out)
    return out


def project_ball_hyperplane(const double[::1] z, const double[::1] c, double R,
                            const double[::1] w, double b, double tol=1e-10):
    out = np.empty(z.shape[0])
    cdef int status = _project_ball_hyperplane(z, c, R, w, b, tol, out)
    if status == 1:
        return None, 1
    return out, status


cdef inline double _model(const double[::1] x, const double[::1] y,
                          const double[::1] g, double a, double L) noexcept nogil:
    cdef Py_ssize_t i
    cdef double lin = 0.0, quad = 0.0, d
    for i in range(x.shape[0]):
        d = x[i] - y[i]
        lin += g[i] * d
        quad += d * d
    return a + lin + 0.5 * L * quad


def gradient_mapping(const double[::1] y, const double[::1] gf, const double[::1] gg,
                     double fy, double gy, double t, double L,
                     const double[::1] c, double R):
    cdef Py_ssize_t i, n = y.shape[0]
    cdef double af = fy - t
    cdef double b, v, v2, best_v = INFINITY
    cdef int best_i = -1, k, status
    zf_a = np.empty(n)
    zg_a = np.empty(n)
    w_a = np.empty(n)
    cands = np.empty((3, n))
    cdef double[::1] zf = zf_a
    cdef double[::1] zg = zg_a
    cdef double[::1] w = w_a
    cdef double[:, ::1] X = cands
    for i in range(n):
        zf[i] = y[i] - gf[i] / L
        zg[i] = y[i] - gg[i] / L
        w[i] = gf[i] - gg[i]
    b = af - gy - _dot(w, y)
    _project_ball(zf, c, R, X[0])
    _project_ball(zg, c, R, X[1])
    status = _project_ball_hyperplane(zf, c, R, w, b, 1e-10, X[2])
    for k in range(3 if status != 1 else 2):
        v = _model(X[k], y, gf, af, L)
        v2 = _model(X[k], y, gg, gy, L)
        if v2 > v:
            v = v2
        if v < best_v:
            best_v = v
            best_i = k
    return cands[best_i].copy(), best_i, best_v


def smooth_chain(const double[::1] x, double L, double R):
    cdef Py_ssize_t i, q = x.shape[0]
    cdef double s = x[0] * x[0] + x[q - 1] * x[q - 1], d
    g_a = np.empty(q)
    cdef double[::1] g = g_a
    for i in range(q - 1):
        d = x[i] - x[i + 1]
        s += d * d
    for i in range(q):
        d = 2.0 * x[i]
        if i > 0:
            d -= x[i - 1]
        if i < q - 1:
            d -= x[i + 1]
        g[i] = 0.25 * L * d
    g[0] -= 0.25 * L * R
    return 0.25 * L * (0.5 * s - R * x[0]), g_a


def lipschitz_chain(const double[::1] x, double C, double R):
    cdef Py_ssize_t i, j = 0, q = x.shape[0]
    cdef double sq = sqrt(<double>q)
    cdef double a = C * sq / (1.0 + sq)
    cdef double bq = C / (R * (1.0 + sq))
    cdef double nrm2 = 0.0
    g_a = np.empty(q)
    cdef double[::1] g = g_a
    for i in range(q):
        nrm2 += x[i] * x[i]
        if x[i] > x[j]:
            j = i
        g[i] = bq * x[i]
    g[j] += a
    return a * x[j] + 0.5 * bq * nrm2, g_a


def grid_min_max_quad(const double[::1] center, double h, int m, double R,
                      const double[::1] uy, const double[::1] pf, const double[::1] pg,
                      double af, double ag, double L):
    cdef Py_ssize_t k = center.shape[0]
    cdef Py_ssize_t i0, i1, i2, n0, n1, n2, a
    cdef double u[3]
    cdef double best[3]
    cdef double du, lin_f, lin_g, quad, v, vg, nrm2, sc, best_v = INFINITY
    cdef double w[3]
    n0 = 2 * m + 1
    n1 = 2 * m + 1 if k > 1 else 1
    n2 = 2 * m + 1 if k > 2 else 1
    for a in range(3):
        best[a] = center[a] if a < k else 0.0
    with nogil:
        for i0 in range(n0):
            u[0] = center[0] + (i0 - m) * h
            for i1 in range(n1):
                if k > 1:
                    u[1] = center[1] + (i1 - m) * h
                for i2 in range(n2):
                    if k > 2:
                        u[2] = center[2] + (i2 - m) * h
                    nrm2 = 0.0
                    for a in range(k):
                        nrm2 += u[a] * u[a]
                    sc = R / sqrt(nrm2) if nrm2 > R * R else 1.0
                    lin_f = 0.0
                    lin_g = 0.0
                    quad = 0.0
                    for a in range(k):
                        w[a] = sc * u[a]
                        du = w[a] - uy[a]
                        lin_f += pf[a] * du
                        lin_g += pg[a] * du
                        quad += du * du
                    v = af + lin_f + 0.5 * L * quad
                    vg = ag + lin_g + 0.5 * L * quad
                    if vg > v:
                        v = vg
                    if v < best_v:
                        best_v = v
                        for a in range(k):
                            best[a] = w[a]
    out = np.empty(k)
    for a in range(k):
        out[a] = best[a]
    return out, best_v
