"""Bisection outer loop: initialization, bracket halving with warm starts, scaling."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .core import (
    BilevelProblem,
    BracketInversion,
    DerivedOracle,
    FirstOrderOracle,
    GroundTruth,
    InvalidArgument,
    InvalidBudget,
    OracleBudgetExhausted,
    Setting,
    SolveReport,
    Tolerances,
    TraceRow,
    Vector,
    as_vector,
    relaxed_constraint,
)
from .subroutines import (
    MinimaxProblem,
    certified_iterations,
    single_level_agm,
    single_level_sgm,
    solve_minimax,
)


@dataclass
class Bracket:
    """Interval [lower, upper] held as exact rationals so widths halve exactly."""

    lower: Fraction
    upper: Fraction

    def __post_init__(self):
        self.lower = Fraction(self.lower)
        self.upper = Fraction(self.upper)
        if self.upper < self.lower:
            raise BracketInversion(f"bracket upper {float(self.upper)!r} < lower {float(self.lower)!r}")

    @property
    def width(self) -> Fraction:
        return self.upper - self.lower

    @property
    def mid(self) -> Fraction:
        return (self.lower + self.upper) / 2

    def rounds_needed(self, eps: float) -> int:
        """Smallest N >= 0 with width / 2^N <= eps / 2, i.e. ceil(log2(width / (eps/2)))."""
        half = Fraction(eps) / 2
        w, n = self.width, 0
        while w > half:
            w /= 2
            n += 1
        return n

    def raise_lower(self, t: Fraction) -> None:
        self.lower = Fraction(t)

    def lower_upper(self, t: Fraction) -> None:
        self.upper = Fraction(t)

    def as_floats(self) -> tuple[float, float]:
        return float(self.lower), float(self.upper)


_MODES = ("certified", "total", "cap")


@dataclass(frozen=True)
class BudgetPolicy:
    """How many inner iterations each bisection round gets.

    certified: the per-round count that guarantees an eps/2-accurate psi value.
    total: a fixed total T split as K = ceil(T / N).
    cap: a fixed per-round K.
    With ``early_exit`` a round stops once an iterate has psi <= eps/2.
    """

    mode: str = "certified"
    total: Optional[int] = None
    per_round: Optional[int] = None
    early_exit: bool = True

    def __post_init__(self):
        if self.mode not in _MODES:
            raise InvalidArgument(f"budget mode must be one of {_MODES}, got {self.mode!r}")
        if self.mode == "total" and (self.total is None or int(self.total) != self.total
                                     or self.total < 1):
            raise InvalidBudget(f"total budget must be a positive integer, got {self.total}")
        if self.mode == "cap" and (self.per_round is None or int(self.per_round) != self.per_round
                                   or self.per_round < 1):
            raise InvalidBudget(f"per-round budget must be a positive integer, got {self.per_round}")

    @classmethod
    def certified(cls, early_exit: bool = True) -> "BudgetPolicy":
        return cls("certified", early_exit=early_exit)

    @classmethod
    def fixed_total(cls, T: int, early_exit: bool = False) -> "BudgetPolicy":
        return cls("total", total=T, early_exit=early_exit)

    @classmethod
    def capped(cls, K: int, early_exit: bool = True) -> "BudgetPolicy":
        return cls("cap", per_round=K, early_exit=early_exit)

    def per_round_iterations(self, N: int, certified_K: int) -> int:
        if self.mode == "certified":
            return certified_K
        if self.mode == "cap":
            return int(self.per_round)
        if N < 1:
            return max(1, int(self.total))
        if self.total < N:
            raise InvalidBudget(f"total budget {self.total} cannot give each of {N} rounds K >= 1")
        return -(-int(self.total) // N)


class _Capped(DerivedOracle):
    """Pass-through oracle that refuses first-order calls once a shared cap is hit."""

    def __init__(self, base: FirstOrderOracle, guard: "_CallGuard"):
        super().__init__(base, 1.0, 0.0, base.label)
        self._guard = guard

    def first_order(self, x):
        self._guard.check()
        return self.base.first_order(x)

    def evaluate(self, x):
        self._guard.check()
        return self.base.evaluate(x)


class _CallGuard:
    def __init__(self, problem: BilevelProblem, limit: int):
        self.problem = problem
        self.limit = int(limit)

    def check(self) -> None:
        if self.problem.oracle_calls() >= self.limit:
            raise OracleBudgetExhausted(f"first-order call limit {self.limit} reached")


class _Recorder:
    """Collects trace rows; values are always those of the unscaled f and g."""

    def __init__(self, problem: BilevelProblem, every: Optional[int]):
        self.problem = problem
        self.every = every
        self.rows: list[TraceRow] = []
        self.start = time.monotonic()

    def row(self, outer: int, inner: int, t: float, psi: float, x: Vector) -> None:
        p = self.problem
        calls = p.oracle_calls()
        self.rows.append(TraceRow(outer, inner, calls, float(t), float(psi), p.f.value(x),
                                  p.g.value(x), time.monotonic() - self.start))

    def inner_callback(self, outer: int, t: float):
        if not self.every:
            return None
        every = int(self.every)

        def cb(k: int, x: Vector) -> None:
            if k > 0 and k % every == 0:
                self.row(outer, k, t, math.nan, x)

        return cb


@dataclass
class InitResult:
    g_hat_star: float
    x_g: Vector
    x_f: Optional[Vector]
    bracket: Bracket
    g_iterations: int = 0
    f_iterations: int = 0


def _single_level(problem: BilevelProblem, h: FirstOrderOracle, const: float, x0: Vector,
                  target: float, lower_bound: Optional[float]) -> tuple[Vector, float, int]:
    """Returns (x, h(x), first-order calls used)."""
    D = problem.ball.diameter
    calls0 = h.calls
    if problem.setting is Setting.LIPSCHITZ:
        K = max(1, math.ceil(4.0 * D * D * const * const / (target * target)))
        x, v = single_level_sgm(h, problem.ball, x0, K, const, lower_bound=lower_bound,
                                target=target)
    else:
        K = max(1, math.ceil(D * math.sqrt(12.0 * const / target)))
        x, v = single_level_agm(h, problem.ball, x0, K, const, lower_bound=lower_bound,
                                target=target)
    return x, v, h.calls - calls0


def initialize(problem: BilevelProblem, eps: float, x0: Optional[Vector] = None,
               f_nonneg: bool = False, g_lower_bound: Optional[float] = None,
               eps_g: Optional[float] = None, recorder: Optional[_Recorder] = None) -> InitResult:
    """Compute g_hat_star, x_g and the starting bracket.

    g is minimized to accuracy eps_g / 2 (eps_g defaults to eps); the upper
    end is u = f(x_g) and the lower end either 0 (``f_nonneg``) or
    f(x_f) - eps/2 for an eps/2-accurate minimizer x_f of f over the ball.
    """
    eps = float(eps)
    if not eps > 0:
        raise InvalidArgument(f"eps must be positive, got {eps}")
    eps_g = eps if eps_g is None else float(eps_g)
    if not eps_g > 0:
        raise InvalidArgument(f"eps_g must be positive, got {eps_g}")
    x0 = problem.ball.center.copy() if x0 is None else as_vector(x0, "x0").copy()
    if x0.shape != problem.ball.center.shape:
        raise InvalidArgument("x0 dimension does not match the ball")
    if not problem.ball.contains(x0):
        x0 = problem.ball.project(x0)

    x_g, g_hat, Kg = _single_level(problem, problem.g, problem.g_const, x0, eps_g / 2,
                                   g_lower_bound)
    u = problem.f.value(x_g)
    if recorder is not None:
        recorder.row(-1, Kg, u, math.nan, x_g)
    x_f, Kf = None, 0
    if f_nonneg:
        lower = 0.0
    else:
        x_f, fv, Kf = _single_level(problem, problem.f, problem.f_const, x0, eps / 2, None)
        lower = fv - eps / 2
        if recorder is not None:
            recorder.row(-1, Kf, lower, math.nan, x_f)
    if u < lower:
        raise BracketInversion(
            f"initial bracket inverted: u = f(x_g) = {u!r} < l = {lower!r}"
            + (" (is f really nonnegative?)" if f_nonneg else ""))
    return InitResult(g_hat, x_g, x_f, Bracket(lower, u), Kg, Kf)


def fc_bio(problem: BilevelProblem, tol, budget: Optional[BudgetPolicy] = None,
           x0: Optional[Vector] = None, f_nonneg: bool = False,
           g_lower_bound: Optional[float] = None, max_oracle_calls: Optional[int] = None,
           trace_every: Optional[int] = None) -> SolveReport:
    """Solve min f over argmin_Z g to (eps_f, eps_g) weak optimality.

    `tol` is a Tolerances or a single float. When eps_f != eps_g the relaxed
    constraint and its constant are scaled by eps_f / eps_g and the bisection
    runs at eps = eps_f. ``max_oracle_calls`` truncates the run (report flag
    ``truncated``) once that many first-order calls have been made.
    """
    tol = tol if isinstance(tol, Tolerances) else Tolerances.uniform(tol)
    budget = budget or BudgetPolicy.certified()
    eps, eps_g = tol.eps_f, tol.eps_g
    scale = eps / eps_g

    base = problem
    work = problem
    if max_oracle_calls is not None:
        guard = _CallGuard(problem, max_oracle_calls)
        work = BilevelProblem(_Capped(problem.f, guard), _Capped(problem.g, guard), problem.ball,
                              problem.setting, problem.f_const, problem.g_const,
                              problem.ground_truth, problem.name, problem.meta)

    calls0 = base.oracle_calls()
    f0, g0 = base.f.calls, base.g.calls
    v0 = base.f.value_calls + base.g.value_calls
    rec = _Recorder(base, trace_every)
    start = problem.ball.center.copy() if x0 is None else as_vector(x0, "x0").copy()
    rec.row(-1, 0, math.nan, math.nan, start)

    report = SolveReport(solution=start, f_value=math.nan, g_value=math.nan, trace=rec.rows,
                         g_hat_star=math.nan, bracket_history=[], eps_f=eps, eps_g=eps_g)
    best = start
    try:
        init = initialize(work, eps, start, f_nonneg, g_lower_bound, eps_g, rec)
        best = init.x_g
        report.g_hat_star = init.g_hat_star
        bracket = init.bracket
        report.bracket_history.append(bracket.as_floats())
        report.bracket_widths.append(bracket.width)

        g_tilde = relaxed_constraint(work.g, init.g_hat_star)
        g_const = work.g_const
        if scale != 1.0:
            g_tilde = DerivedOracle(g_tilde, scale, 0.0, label=f"{g_tilde.label}o")
            g_const *= scale
        mp = MinimaxProblem(work.f, g_tilde, float(bracket.upper), work.ball,
                            max(work.f_const, g_const), work.setting)

        N = bracket.rounds_needed(eps)
        certified_K = certified_iterations(work.setting, work.ball.diameter, mp.constant, eps)
        K = budget.per_round_iterations(N, certified_K)
        report.inner_budget = K
        half = eps / 2
        exit_below = half if budget.early_exit else None

        if N == 0:
            # already narrow: one psi evaluation at t = u, return x_g
            res = solve_minimax(mp.at(float(bracket.upper)), init.x_g, 1, exit_below=math.inf)
            report.round_psi.append(res.psi_hat)
            rec.row(0, 0, float(bracket.upper), res.psi_hat, init.x_g)
        else:
            x_u: Optional[Vector] = None
            x = init.x_g
            for k in range(N):
                t = bracket.mid
                tf = float(t)
                report.round_starts.append(x)
                res = solve_minimax(mp.at(tf), x, K, exit_below=exit_below,
                                    callback=rec.inner_callback(k, tf))
                x = res.x_hat
                report.round_outputs.append(x)
                report.round_psi.append(res.psi_hat)
                if res.psi_hat > half:
                    bracket.raise_lower(t)
                else:
                    bracket.lower_upper(t)
                    x_u = x
                    best = x
                report.rounds = k + 1
                report.bracket_history.append(bracket.as_floats())
                report.bracket_widths.append(bracket.width)
                rec.row(k, res.inner_iterations, tf, res.psi_hat, x)
            if x_u is None:
                report.u_never_updated = True
                best = init.x_g
    except OracleBudgetExhausted:
        report.truncated = True

    report.solution = best
    report.f_value = base.f.value(best)
    report.g_value = base.g.value(best)
    report.f_calls = base.f.calls - f0
    report.g_calls = base.g.calls - g0
    report.value_calls = base.f.value_calls + base.g.value_calls - v0
    report.wall_seconds = time.monotonic() - rec.start
    assert report.oracle_calls == base.oracle_calls() - calls0
    return report


@dataclass
class Certification:
    f_gap: float
    g_gap: float
    eps_f: float
    eps_g: float
    f_ok: bool = field(init=False)
    g_ok: bool = field(init=False)

    def __post_init__(self):
        self.f_ok = self.f_gap <= self.eps_f
        self.g_ok = self.g_gap <= self.eps_g

    @property
    def certified(self) -> bool:
        return self.f_ok and self.g_ok

    @property
    def f_below_optimum(self) -> bool:
        return self.f_gap < 0

    def as_dict(self) -> dict:
        return {"f_gap": self.f_gap, "g_gap": self.g_gap, "f_ok": self.f_ok,
                "g_ok": self.g_ok, "certified": self.certified}


def certify(report: SolveReport, ground_truth) -> Certification:
    """Weak-optimality check; the signed f-gap may legitimately be negative."""
    if ground_truth is None:
        raise InvalidArgument("certification needs a ground truth (f*, g*)")
    if isinstance(ground_truth, GroundTruth):
        f_star, g_star = ground_truth.f_star, ground_truth.g_star
    else:
        f_star, g_star = ground_truth
    return Certification(report.f_value - float(f_star), report.g_value - float(g_star),
                         report.eps_f, report.eps_g)
