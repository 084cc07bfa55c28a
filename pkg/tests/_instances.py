"""Random minimax instances with convex-solver reference values.

Lipschitz references come from cvxpy/Clarabel on the epigraph form. Smooth
references maximize the concave dual over lam in [0, 1], where each inner
problem is a ball-constrained quadratic solved by eigendecomposition and a
secular-equation root; every dual value is a certified lower bound, so the
reference is accurate to ~1e-13 rather than the conic solver's ~1e-8.
"""

import cvxpy as cp
import numpy as np
from scipy.optimize import brentq, minimize_scalar

from fcbio.core import Ball, FirstOrderOracle, Setting
from fcbio.subroutines import MinimaxProblem

_CLARABEL = dict(solver=cp.CLARABEL)


def _solve(objective, constraints):
    prob = cp.Problem(cp.Minimize(objective), constraints)
    prob.solve(**_CLARABEL)
    assert prob.status == cp.OPTIMAL, prob.status
    return float(prob.value)


class Instance:
    def __init__(self, problem: MinimaxProblem, reference):
        self.problem = problem
        self._reference = reference

    def psi_star(self, t=None) -> float:
        return self._reference(self.problem.t if t is None else t)


def lipschitz_instance(rng, n: int) -> Instance:
    """f = max_i (a_i.x + c_i), g~ = |Bx - d| - s over a random ball."""
    A = rng.standard_normal((3, n))
    c = rng.standard_normal(3) * 0.3
    B = rng.standard_normal((n, n)) / np.sqrt(n)
    d = rng.standard_normal(n)
    center = rng.standard_normal(n) * 0.3
    R = float(rng.uniform(0.3, 0.6))

    def f_val(x):
        return float(np.max(A @ x + c))

    def f_sub(x):
        return A[int(np.argmax(A @ x + c))].copy()

    r0 = np.linalg.norm(B @ center - d)
    s = float(r0 - rng.uniform(0.0, 0.5))

    def g_val(x):
        return float(np.linalg.norm(B @ x - d)) - s

    def g_sub(x):
        r = B @ x - d
        nr = np.linalg.norm(r)
        return B.T @ r / nr if nr > 0 else np.zeros(n)

    Cf = float(np.max(np.linalg.norm(A, axis=1)))
    Cg = float(np.linalg.norm(B, 2))
    ball = Ball(center, R)
    t = f_val(center) - g_val(center) + float(rng.uniform(-0.2, 0.2))
    p = MinimaxProblem(FirstOrderOracle(f_val, f_sub, "f"), FirstOrderOracle(g_val, g_sub, "g"),
                       t, ball, max(Cf, Cg), Setting.LIPSCHITZ)

    def ref(tt):
        x = cp.Variable(n)
        obj = cp.maximum(cp.max(A @ x + c) - tt, cp.norm(B @ x - d) - s)
        return _solve(obj, [cp.norm(x - center) <= R])

    return Instance(p, ref)


def smooth_instance(rng, n: int) -> Instance:
    """Convex quadratics f and g~ over a random ball."""
    M1 = rng.standard_normal((n, n)) / np.sqrt(n)
    M2 = rng.standard_normal((n, n)) / np.sqrt(n)
    H, G = M1 @ M1.T, M2 @ M2.T
    q, p_ = rng.standard_normal(n), rng.standard_normal(n)
    r = float(rng.standard_normal())
    center = rng.standard_normal(n) * 0.5
    R = float(rng.uniform(0.5, 1.0))

    def fv(x):
        return 0.5 * float(x @ H @ x) + float(q @ x)

    def gv(x):
        return 0.5 * float(x @ G @ x) + float(p_ @ x) + r

    L = max(float(np.linalg.eigvalsh(H)[-1]), float(np.linalg.eigvalsh(G)[-1]))
    t = fv(center) - gv(center) + float(rng.uniform(-0.3, 0.3))
    prob = MinimaxProblem(FirstOrderOracle(fv, lambda x: H @ x + q, "f"),
                          FirstOrderOracle(gv, lambda x: G @ x + p_, "g"),
                          t, Ball(center, R), L, Setting.SMOOTH)

    def ref(tt):
        def dual(lam):
            M = lam * H + (1 - lam) * G
            v = lam * q + (1 - lam) * p_
            const = -lam * tt + (1 - lam) * r
            return ball_quadratic_min(M, v, center, R) + const

        res = minimize_scalar(lambda lam: -dual(lam), bounds=(0.0, 1.0), method="bounded",
                              options={"xatol": 1e-13})
        return max(dual(res.x), dual(0.0), dual(1.0))

    return Instance(prob, ref)


def ball_quadratic_min(M, v, center, R) -> float:
    """min of 0.5 x'Mx + v'x over |x - center| <= R, M symmetric PSD."""
    b = M @ center + v  # gradient at the center; x = center + z
    base = 0.5 * float(center @ M @ center) + float(v @ center)
    lam, Q = np.linalg.eigh(M)
    lam = np.maximum(lam, 0.0)
    bt = Q.T @ b

    def z_norm(mu):
        return float(np.linalg.norm(bt / (lam + mu)))

    def value(z):
        return base + 0.5 * float(z @ M @ z) + float(b @ z)

    if lam[0] > 1e-12 and z_norm(0.0) <= R:
        return value(-Q @ (bt / lam))
    lo = max(0.0, -lam[0]) + 1e-300
    if z_norm(lo) <= R:
        # singular M with b in its range: interior pseudo-inverse solution
        keep = lam > 1e-12 * max(lam[-1], 1.0)
        zt = np.zeros_like(bt)
        zt[keep] = -bt[keep] / lam[keep]
        return value(Q @ zt)
    hi = 1.0
    while z_norm(hi) > R:
        hi *= 2.0
    mu = brentq(lambda m: z_norm(m) - R, lo, hi, xtol=1e-15, rtol=1e-15)
    return value(-Q @ (bt / (lam + mu)))
