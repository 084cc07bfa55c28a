"""Independent reference oracles, the zero-respecting monitor and verification suites.

Nothing here is used on the solver path.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import _backend
from .core import (
    Ball,
    BilevelProblem,
    DerivedOracle,
    FirstOrderOracle,
    InvalidArgument,
    OracleBudgetExhausted,
    Setting,
    SingularSystem,
    Vector,
)
from .problems import DesignMatrix

# -- ground truth --------------------------------------------------------------

_COND_LIMIT = 1e14


def min_norm_ground_truth(data: DesignMatrix) -> tuple[Vector, float]:
    """Minimum-norm solution of Ax = b via x* = A^T (A A^T)^{-1} b."""
    A, b = data.A, data.b
    if b is None:
        raise InvalidArgument("min-norm ground truth needs a right-hand side b")
    if not np.any(b):
        x = np.zeros(A.shape[1])
        return x, 0.0
    M = A @ A.T
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise SingularSystem(f"A A^T is numerically singular (condition estimate {cond:.3g})")
    x = A.T @ np.linalg.solve(M, b)  # LU with partial pivoting
    res = float(np.linalg.norm(A @ x - b))
    if res > 1e-8 * (1.0 + float(np.linalg.norm(b))):
        raise SingularSystem(f"Ax = b appears inconsistent (residual {res:.3g})")
    return x, 0.5 * float(x @ x)


# -- reference psi* ------------------------------------------------------------

def psi_star_reference(p, accuracy: float, x0: Optional[Vector] = None) -> float:
    """Best psi value seen by the subroutine run at 16x the iteration count
    that guarantees `accuracy`."""
    from .subroutines import certified_iterations, psi_value, solve_minimax

    if not accuracy > 0:
        raise InvalidArgument("accuracy must be positive")
    K = 16 * certified_iterations(p.setting, p.ball.diameter, p.constant, 2.0 * accuracy)
    x0 = p.ball.center.copy() if x0 is None else np.asarray(x0, dtype=np.float64)
    best = [psi_value(p, x0)]

    def seen(_k, x):
        v = psi_value(p, x)
        if v < best[0]:
            best[0] = v

    res = solve_minimax(p, x0, K, callback=seen)
    return min(best[0], res.psi_hat)


# -- brute-force gradient mapping ---------------------------------------------

def _span_basis(vectors: list[Vector], tol: float = 1e-12) -> np.ndarray:
    M = np.column_stack(vectors)
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    scale = s[0] if s.size and s[0] > 0 else 0.0
    rank = int(np.sum(s > tol * max(scale, 1.0))) if scale > 0 else 0
    return U[:, :rank]


def gradient_mapping_bruteforce(p, y: Vector, grid: int = 100,
                                refinements: int = 30) -> tuple[Vector, float]:
    """Grid search for argmin over the ball of max of the two L-quadratic models at y.

    The minimizer lies in c + span{y - c, grad f(y), grad g~(y)}, so the search
    runs over an orthonormal basis of that (at most 3-dimensional) subspace:
    a (grid+1)^k grid over the radius-R cube, then local 17^k grids around the
    incumbent. The spacing halves only when the incumbent is interior to the
    local window; otherwise the window slides. `refinements` counts halvings.
    Grid points tend to stall in the thin valley where the two models cross on
    the sphere, so a 1-D scan of the concave dual also proposes a point, and
    the better of the two is returned.
    """
    from .subroutines import psi_bar

    if grid < 100:
        raise InvalidArgument("grid must be at least 100 points per axis")
    y = np.asarray(y, dtype=np.float64)
    fy, gf = p.f.evaluate(y)
    gy, gg = p.g_tilde.evaluate(y)
    gf = np.asarray(gf, dtype=np.float64)
    gg = np.asarray(gg, dtype=np.float64)
    c, R, L, t = p.ball.center, p.ball.radius, p.constant, p.t
    Q = _span_basis([y - c, gf, gg])
    if Q.shape[1] == 0:
        return c.copy(), psi_bar(c, y, fy, gf, gy, gg, t, L)
    if Q.shape[1] > 3:
        raise InvalidArgument("spanned subspace has dimension > 3")
    uy = np.ascontiguousarray(Q.T @ (y - c))
    pf = np.ascontiguousarray(Q.T @ gf)
    pg = np.ascontiguousarray(Q.T @ gg)
    k = Q.shape[1]
    u_dual = _dual_scan(uy, pf, pg, fy - t, gy, L, R)
    kern = _backend.kernels
    m = grid // 2
    h = R / m
    u, _ = kern.grid_min_max_quad(np.zeros(k), h, m, R, uy, pf, pg, fy - t, gy, L)
    local, halvings, steps = 8, 0, 0
    while halvings < refinements and steps < 50 * refinements:
        steps += 1
        centre = np.ascontiguousarray(u)
        u, _ = kern.grid_min_max_quad(centre, h, local, R, uy, pf, pg, fy - t, gy, L)
        if np.max(np.abs(u - centre)) < (local - 0.5) * h:
            h *= 0.5
            halvings += 1
    best = None
    for cand in (u, u_dual):
        x = c + Q @ cand
        v = psi_bar(x, y, fy, gf, gy, gg, t, L)
        if best is None or v < best[1]:
            best = (x, v)
    return best


def _dual_scan(uy, pf, pg, af, ag, L, R, points: int = 1001, rounds: int = 40):
    """Grid search of the concave dual over lam in [0, 1].

    For fixed lam the Lagrangian lam*F + (1-lam)*G has identity Hessian L, so
    its minimizer over |u| <= R is a radial clip of uy - (lam pf + (1-lam) pg)/L.
    Returns the primal point at the best lam found.
    """
    def primal(lam):
        z = uy[None, :] - (lam[:, None] * pf + (1.0 - lam[:, None]) * pg) / L
        nrm = np.linalg.norm(z, axis=1)
        scale = np.where(nrm > R, R / np.maximum(nrm, 1e-300), 1.0)
        return z * scale[:, None]

    def dual(lam):
        U = primal(lam)
        D = U - uy
        q = 0.5 * L * np.einsum("ij,ij->i", D, D)
        return lam * (af + D @ pf + q) + (1.0 - lam) * (ag + D @ pg + q)

    lo, hi = 0.0, 1.0
    for _ in range(rounds):
        lam = np.linspace(lo, hi, points)
        i = int(np.argmax(dual(lam)))
        step = (hi - lo) / (points - 1)
        lo, hi = max(0.0, lam[i] - 4 * step), min(1.0, lam[i] + 4 * step)
    return primal(np.array([lam[i]]))[0]


def finite_difference_gradient(h: FirstOrderOracle, x: Vector, step: float = 1e-6) -> Vector:
    """Central differences with per-coordinate step ``step * (1 + |x_i|)``."""
    if not step > 0:
        raise InvalidArgument("step must be positive")
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    for i in range(x.size):
        d = step * (1.0 + abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += d
        xm[i] -= d
        out[i] = (h.value(xp) - h.value(xm)) / (xp[i] - xm[i])
    return out


# -- zero-respecting monitor ---------------------------------------------------

def _support(v: Vector) -> frozenset:
    return frozenset(np.flatnonzero(np.asarray(v) != 0.0).tolist())


class QueryEvent(NamedTuple):
    index: int
    label: str
    kind: str  # "first_order" or "value"
    point: Vector
    point_support: frozenset
    output_support: Optional[frozenset]
    f_outputs_before: int


class Violation(NamedTuple):
    index: int
    label: str
    extra: frozenset


@dataclass
class SupportLedger:
    """Supports of every queried point and every returned first-order vector."""

    x0_support: frozenset
    events: list = field(default_factory=list)
    f_outputs: int = 0

    def __post_init__(self):
        self._lock = threading.Lock()

    def record(self, label: str, kind: str, x: Vector, out: Optional[Vector]) -> None:
        with self._lock:
            before = self.f_outputs
            if out is not None and label == "f":
                self.f_outputs += 1
            self.events.append(QueryEvent(len(self.events), label, kind, np.array(x, copy=True),
                                          _support(x), None if out is None else _support(out),
                                          before))

    def check(self) -> list[Violation]:
        """Queries whose support leaves supp(x0) plus all earlier output supports."""
        allowed = set(self.x0_support)
        bad = []
        for ev in self.events:
            extra = ev.point_support - allowed
            if extra:
                bad.append(Violation(ev.index, ev.label, frozenset(extra)))
            if ev.output_support is not None:
                allowed |= ev.output_support
        return bad

    def points(self, max_f_outputs: Optional[int] = None) -> list[Vector]:
        """Queried points, optionally only those made while at most
        `max_f_outputs` first-order outputs of f had been returned."""
        return [ev.point for ev in self.events
                if max_f_outputs is None or ev.f_outputs_before <= max_f_outputs]


class _Monitored(DerivedOracle):
    def __init__(self, base: FirstOrderOracle, name: str, ledger: SupportLedger,
                 limit: Callable[[], None]):
        super().__init__(base, 1.0, 0.0, base.label)
        self._name = name
        self._ledger = ledger
        self._limit = limit

    def value(self, x):
        v = self.base.value(x)
        self._ledger.record(self._name, "value", x, None)
        return v

    def first_order(self, x):
        self._limit(self._name)
        s = self.base.first_order(x)
        self._ledger.record(self._name, "first_order", x, s)
        return s

    def evaluate(self, x):
        self._limit(self._name)
        v, s = self.base.evaluate(x)
        self._ledger.record(self._name, "first_order", x, s)
        return v, s


def monitor_zero_respecting(problem: BilevelProblem, f_call_limit: Optional[int] = None,
                            total_call_limit: Optional[int] = None
                            ) -> tuple[BilevelProblem, SupportLedger]:
    """Wrap f and g so every query is logged; optional call limits raise
    OracleBudgetExhausted before the offending call is made."""
    ledger = SupportLedger(_support(problem.ball.center))
    counts = {"f": 0, "g": 0}
    lock = threading.Lock()

    def limit(name: str) -> None:
        with lock:
            if f_call_limit is not None and name == "f" and counts["f"] >= f_call_limit:
                raise OracleBudgetExhausted(f"f first-order limit {f_call_limit} reached")
            if total_call_limit is not None and counts["f"] + counts["g"] >= total_call_limit:
                raise OracleBudgetExhausted(f"first-order limit {total_call_limit} reached")
            counts[name] += 1

    wrapped = BilevelProblem(_Monitored(problem.f, "f", ledger, limit),
                             _Monitored(problem.g, "g", ledger, limit),
                             problem.ball, problem.setting, problem.f_const, problem.g_const,
                             problem.ground_truth, problem.name, dict(problem.meta))
    return wrapped, ledger


# -- hardness experiments (shared by tests and the CLI) ------------------------

@dataclass
class StallResult:
    T: int
    f_values: list
    violations: list
    f_x0: float
    f_star: float
    report: object = None

    @property
    def stalled(self) -> bool:
        return all(v == 0.0 for v in self.f_values) and not self.violations

    @property
    def abs_gap_x0(self) -> float:
        return abs(self.f_x0 - self.f_star)


def run_stall(problem: BilevelProblem, eps: float = 1e-3) -> StallResult:
    """Monitored solver run from x0 = 0 truncated after T first-order calls."""
    from .driver import fc_bio

    T = int(problem.meta["T"])
    mon, ledger = monitor_zero_respecting(problem, total_call_limit=T)
    report = fc_bio(mon, eps, x0=np.zeros(problem.dim))
    pts = [ev.point for ev in ledger.events if ev.index < _first_order_cutoff(ledger, T)]
    f_vals = [problem.f.value(x) for x in pts]
    return StallResult(T, f_vals, ledger.check(), problem.f.value(np.zeros(problem.dim)),
                       problem.ground_truth.f_star, report)


def _first_order_cutoff(ledger: SupportLedger, T: int) -> int:
    """Index one past the T-th first-order event (all events if fewer)."""
    n = 0
    for ev in ledger.events:
        if ev.kind == "first_order":
            n += 1
            if n == T:
                return ev.index + 1
    return len(ledger.events)


@dataclass
class FloorResult:
    T: int
    best_gap: float
    floor: float
    violations: list
    report: object = None

    @property
    def holds(self) -> bool:
        return self.best_gap >= self.floor - 1e-12 and not self.violations


def lower_bound_floor(setting, T: int, constant: float = 1.0, D: float = 1.0) -> float:
    setting = Setting(setting)
    if setting is Setting.SMOOTH:
        return 3.0 * constant * D * D / (32.0 * (T + 1) ** 2)
    return constant * D / (2.0 * (1.0 + math.sqrt(T)))


def run_floor(setting, T: int = 20, eps: float = 1e-2) -> FloorResult:
    """Upper-level chain instance; best f over points queried before the T-th f output."""
    from .driver import fc_bio
    from .problems import make_lower_bound_instance

    problem = make_lower_bound_instance(setting, "upper", T)
    mon, ledger = monitor_zero_respecting(problem, f_call_limit=T)
    report = fc_bio(mon, eps, x0=np.zeros(problem.dim), g_lower_bound=0.0)
    pts = ledger.points(max_f_outputs=T - 1)
    f_star = problem.ground_truth.f_star
    best = min(problem.f.value(x) for x in pts) - f_star
    return FloorResult(T, best, lower_bound_floor(setting, T), ledger.check(), report)


# -- suites --------------------------------------------------------------------

class Check(NamedTuple):
    suite: str
    name: str
    passed: bool
    detail: str


def _suite_projections(rng) -> list[Check]:
    from .geometry import Hyperplane, project_ball, project_ball_hyperplane

    out = []
    idem = nonexp = slice_ok = True
    for _ in range(200):
        n = int(rng.integers(1, 6))
        ball = Ball(rng.standard_normal(n), float(rng.uniform(0.5, 2.0)))
        a, b = rng.standard_normal(n) * 3, rng.standard_normal(n) * 3
        pa, pb = project_ball(a, ball), project_ball(b, ball)
        idem &= bool(np.allclose(project_ball(pa, ball), pa, atol=1e-12))
        nonexp &= bool(np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) + 1e-12)
        w = rng.standard_normal(n)
        H = Hyperplane(w, -float(w @ ball.center) + 0.5 * ball.radius * float(np.linalg.norm(w)))
        x = project_ball_hyperplane(a, ball, H)
        # optimality: no sampled feasible point of the slice is closer to a
        d = np.linalg.norm(x - a)
        for _ in range(50):
            v = ball.center + rng.standard_normal(n) * ball.radius
            v = H.project(v)
            if np.linalg.norm(v - ball.center) <= ball.radius:
                slice_ok &= bool(np.linalg.norm(v - a) >= d - 1e-9)
        slice_ok &= ball.contains(x, 1e-9) and abs(H.residual(x)) <= 1e-9 * (1 + abs(H.offset))
    out.append(Check("projections", "ball projection idempotent", idem, "200 random cases"))
    out.append(Check("projections", "ball projection nonexpansive", nonexp, "200 random pairs"))
    out.append(Check("projections", "ball-hyperplane projection optimal vs sampling", slice_ok,
                     "200 cases x 50 samples"))
    return out


def _random_smooth_minimax(rng, n: int):
    from .subroutines import MinimaxProblem

    def quad(M, q, r, label):
        H = M @ M.T
        return FirstOrderOracle(lambda x: 0.5 * float(x @ H @ x) + float(q @ x) + r,
                                lambda x: H @ x + q, label), float(np.linalg.eigvalsh(H)[-1])

    f, Lf = quad(rng.standard_normal((n, n)) / math.sqrt(n), rng.standard_normal(n), 0.0, "f")
    g, Lg = quad(rng.standard_normal((n, n)) / math.sqrt(n), rng.standard_normal(n),
                 float(rng.standard_normal()), "g")
    ball = Ball(rng.standard_normal(n) * 0.5, float(rng.uniform(0.5, 1.5)))
    return MinimaxProblem(f, g, float(rng.standard_normal()), ball, max(Lf, Lg, 1e-3),
                          Setting.SMOOTH)


def _suite_subroutines(rng) -> list[Check]:
    from .subroutines import gradient_mapping_step, psi_bar

    worst = 0.0
    for _ in range(25):
        p = _random_smooth_minimax(rng, 3)
        y = p.ball.center + rng.standard_normal(3)
        x = gradient_mapping_step(p, y)
        fy, gf = p.f.evaluate(y)
        gy, gg = p.g_tilde.evaluate(y)
        v = psi_bar(x, y, fy, gf, gy, gg, p.t, p.constant)
        _, vb = gradient_mapping_bruteforce(p, y)
        worst = max(worst, abs(v - vb))
    out = [Check("subroutines", "gradient mapping matches brute force", worst <= 1e-6,
                 f"max |diff| = {worst:.2e} over 25 cases")]
    from .subroutines import next_alpha

    a1 = next_alpha(0.5)
    out.append(Check("subroutines", "alpha recursion", abs(a1 - 0.390388) < 1e-6, f"a1 = {a1:.6f}"))
    return out


def _suite_driver(rng) -> list[Check]:
    from .driver import certify, fc_bio
    from .problems import make_min_norm_problem, synthetic_min_norm

    data = synthetic_min_norm(10, 20, 3)
    prob = make_min_norm_problem(data, 2.0)
    x_star, f_star = min_norm_ground_truth(data)
    rep = fc_bio(prob, 1e-4)
    cert = certify(rep, (f_star, 0.0))
    widths = rep.bracket_widths
    halving = all(widths[i + 1] * 2 == widths[i] for i in range(len(widths) - 1))
    return [
        Check("driver", "min-norm weak optimality", cert.certified,
              f"f_gap={cert.f_gap:.2e} g_gap={cert.g_gap:.2e}"),
        Check("driver", "bracket halves exactly", halving, f"{rep.rounds} rounds"),
        Check("driver", "exit width <= eps/2", float(widths[-1]) <= 0.5e-4,
              f"width={float(widths[-1]):.3g}"),
    ]


def _suite_hardness(rng) -> list[Check]:
    from .problems import make_lipschitz_hard_instance, make_smooth_hard_instance

    out = []
    for name, make in (("smooth", make_smooth_hard_instance),
                       ("lipschitz", make_lipschitz_hard_instance)):
        r = run_stall(make(50))
        out.append(Check("hardness", f"{name} stall (T=50)", r.stalled and r.abs_gap_x0 >= 1 / 48,
                         f"|f(x0)-f*|={r.abs_gap_x0:.6f}, violations={len(r.violations)}"))
    for setting in (Setting.SMOOTH, Setting.LIPSCHITZ):
        r = run_floor(setting, 20)
        out.append(Check("hardness", f"{setting.value} lower-bound floor (T=20)", r.holds,
                         f"gap={r.best_gap:.3e} floor={r.floor:.3e}"))
    return out


SUITES = {
    "projections": _suite_projections,
    "subroutines": _suite_subroutines,
    "driver": _suite_driver,
    "hardness": _suite_hardness,
}


def run_suite(name: str, seed: int = 0) -> list[Check]:
    if name == "all":
        names = list(SUITES)
    elif name in SUITES:
        names = [name]
    else:
        raise InvalidArgument(f"unknown suite {name!r}; choose from {sorted(SUITES) + ['all']}")
    checks = []
    for n in names:
        checks += SUITES[n](np.random.default_rng(seed))
    return checks


__all__ = [
    "Check", "SupportLedger", "Violation", "finite_difference_gradient",
    "gradient_mapping_bruteforce", "lower_bound_floor", "min_norm_ground_truth",
    "monitor_zero_respecting", "psi_star_reference", "run_floor", "run_stall", "run_suite",
]
