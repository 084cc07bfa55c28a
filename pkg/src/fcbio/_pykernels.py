"""Pure numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
Status codes from the hyperplane projection: 0 regular, 1 empty
intersection, 2 degenerate (projected point coincides with the circle center).
"""

import math

import numpy as np

BACKEND = "python"


def project_ball(z, c, R):
    d = z - c
    nrm = math.sqrt(float(d @ d))
    if nrm <= R:
        return z.copy()
    return c + (R / nrm) * d


def project_ball_hyperplane(z, c, R, w, b, tol=1e-10):
    ww = float(w @ w)
    if ww == 0.0:
        return None, 1
    sc = (float(w @ c) + b) / ww
    dist2 = sc * sc * ww
    slack = R + tol * max(1.0, R)
    if dist2 > slack * slack:
        return None, 1
    zh = z - ((float(w @ z) + b) / ww) * w
    dz = zh - c
    if float(dz @ dz) <= R * R:
        return zh, 0
    ch = c - sc * w
    r = math.sqrt(max(R * R - dist2, 0.0))
    d = zh - ch
    nd = math.sqrt(float(d @ d))
    if nd > 0.0:
        return ch + (r / nd) * d, 0
    # direction of the lowest-index basis vector that survives projection onto H
    for i in range(z.size):
        e = -(w[i] / ww) * w
        e[i] += 1.0
        ne = math.sqrt(float(e @ e))
        if ne > 1e-12:
            return ch + (r / ne) * e, 2
    return ch, 2


def _model(x, y, gvec, a, L):
    d = x - y
    return a + float(gvec @ d) + 0.5 * L * float(d @ d)


def gradient_mapping(y, gf, gg, fy, gy, t, L, c, R):
    """Minimize max of the two L-quadratic upper models over the ball.

    Returns ``(x, index, model_value)`` with ``index`` in {0, 1, 2}.
    """
    af = fy - t
    zf = y - gf / L
    zg = y - gg / L
    best_x = None
    best_v = math.inf
    best_i = -1
    cands = [project_ball(zf, c, R), project_ball(zg, c, R)]
    w = gf - gg
    b = af - gy - float(w @ y)
    x3, status = project_ball_hyperplane(zf, c, R, w, b)
    if status != 1:
        cands.append(x3)
    for i, x in enumerate(cands):
        v = max(_model(x, y, gf, af, L), _model(x, y, gg, gy, L))
        if v < best_v:
            best_v, best_x, best_i = v, x, i
    return best_x, best_i, best_v


def smooth_chain(x, L, R):
    """Value and gradient of (L/4)(0.5*(x1^2 + sum (x_i - x_{i+1})^2 + x_q^2) - R x1)."""
    d = np.diff(x)
    val = 0.25 * L * (0.5 * (x[0] * x[0] + float(d @ d) + x[-1] * x[-1]) - R * x[0])
    g = 2.0 * x
    g[:-1] -= x[1:]
    g[1:] -= x[:-1]
    g *= 0.25 * L
    g[0] -= 0.25 * L * R
    return float(val), g


def lipschitz_chain(x, C, R):
    """Value and resisting subgradient of the max-plus-quadratic chain."""
    q = x.size
    sq = math.sqrt(q)
    a = C * sq / (1.0 + sq)
    bq = C / (R * (1.0 + sq))
    j = int(np.argmax(x))  # first occurrence = smallest active index
    val = a * float(x[j]) + 0.5 * bq * float(x @ x)
    g = bq * x
    g[j] += a
    return float(val), g


def grid_min_max_quad(center, h, m, R, uy, pf, pg, af, ag, L):
    """Scan a (2m+1)^k grid with spacing h around `center` (k <= 3 coords).

    Minimizes max(F, G) with F(u) = af + pf.(u-uy) + L/2 |u-uy|^2 (same for G)
    over the grid points, each first pulled radially onto |u| <= R.
    Returns ``(u_best, value)``.
    """
    k = center.size
    offs = np.arange(-m, m + 1, dtype=np.float64) * h
    axes = [center[i] + offs for i in range(k)]
    mesh = np.meshgrid(*axes, indexing="ij")
    U = np.stack([a.ravel() for a in mesh], axis=1)
    nrm = np.sqrt(np.einsum("ij,ij->i", U, U))
    out = nrm > R
    U[out] *= (R / nrm[out])[:, None]
    D = U - uy
    q = 0.5 * L * np.einsum("ij,ij->i", D, D)
    vals = np.maximum(af + D @ pf + q, ag + D @ pg + q)
    i = int(np.argmin(vals))
    return U[i].copy(), float(vals[i])
