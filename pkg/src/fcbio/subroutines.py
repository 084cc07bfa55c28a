"""Inner solvers for min_x max{f(x) - t, g~(x)} over a ball, plus single-level solvers.

Lipschitz problems use the projected subgradient method with the averaged
output; smooth problems use Nesterov's accelerated scheme in which the
gradient step is replaced by the exact two-function gradient mapping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import _backend
from .core import Ball, FirstOrderOracle, InvalidArgument, Setting, Vector


@dataclass
class MinimaxProblem:
    """psi(t, x) = max{f(x) - t, g_tilde(x)} over `ball`.

    `constant` is max{L_f, L_g~} in the smooth setting and max{C_f, C_g~}
    in the Lipschitz setting.
    """

    f: FirstOrderOracle
    g_tilde: FirstOrderOracle
    t: float
    ball: Ball
    constant: float
    setting: Setting = Setting.SMOOTH

    def __post_init__(self):
        self.setting = Setting(self.setting)
        if not self.constant > 0:
            raise InvalidArgument("minimax constant must be positive")
        self.t = float(self.t)

    def at(self, t: float) -> "MinimaxProblem":
        return MinimaxProblem(self.f, self.g_tilde, t, self.ball, self.constant, self.setting)

    def oracle_calls(self) -> int:
        return self.f.calls + self.g_tilde.calls


class SubroutineResult(NamedTuple):
    x_hat: Vector
    psi_hat: float
    inner_iterations: int
    oracle_calls: int
    early_exit: bool = False


def psi_value(p: MinimaxProblem, x: Vector) -> float:
    return max(p.f.value(x) - p.t, p.g_tilde.value(x))


def psi_subgradient(p: MinimaxProblem, x: Vector) -> Vector:
    """A subgradient of psi(t, .) at x: the active branch's, f on exact ties."""
    if p.f.value(x) - p.t >= p.g_tilde.value(x):
        return p.f.first_order(x)
    return p.g_tilde.first_order(x)


def next_alpha(alpha: float) -> float:
    """Positive root of a'^2 = (1 - a') * alpha^2."""
    a2 = alpha * alpha
    return 0.5 * (-a2 + math.sqrt(a2 * a2 + 4.0 * a2))


def momentum(alpha: float, alpha_next: float) -> float:
    return alpha * (1.0 - alpha) / (alpha * alpha + alpha_next)


def psi_bar(x: Vector, y: Vector, fy: float, gf: Vector, gy: float, gg: Vector,
            t: float, L: float) -> float:
    """Max of the two L-quadratic upper models built at y, evaluated at x."""
    d = x - y
    q = 0.5 * L * float(d @ d)
    return max(fy - t + float(gf @ d) + q, gy + float(gg @ d) + q)


def _contig(v) -> Vector:
    return np.ascontiguousarray(v, dtype=np.float64)


def _require_K(K) -> int:
    if int(K) != K or K < 1:
        raise InvalidArgument(f"iteration count K must be a positive integer, got {K}")
    return int(K)


def sgm_minimax(p: MinimaxProblem, x0: Vector, K: int, exit_below: Optional[float] = None,
                check_every: int = 50,
                callback: Optional[Callable[[int, Vector], None]] = None) -> SubroutineResult:
    """Projected subgradient method on psi(t, .) with step D / (C sqrt(K)).

    Returns the average of x_0..x_{K-1}. With `exit_below`, stops as soon as
    psi at the start point, or at the running average (checked every
    `check_every` steps), is at most that threshold.
    """
    K = _require_K(K)
    ball = p.ball
    kern = _backend.kernels
    c, R = ball.center, ball.radius
    eta = ball.diameter / (p.constant * math.sqrt(K))
    calls0 = p.oracle_calls()
    x = np.array(x0, dtype=np.float64)
    if exit_below is not None:
        v = psi_value(p, x)
        if v <= exit_below:
            return SubroutineResult(x, v, 0, 0, True)
    total = np.zeros_like(x)
    for k in range(K):
        total += x
        if callback is not None:
            callback(k, x)
        s = psi_subgradient(p, x)
        x = kern.project_ball(_contig(x - eta * s), c, R)
        if exit_below is not None and (k + 1) % check_every == 0 and k + 1 < K:
            avg = total / (k + 1)
            v = psi_value(p, avg)
            if v <= exit_below:
                return SubroutineResult(avg, v, k + 1, p.oracle_calls() - calls0, True)
    avg = total / K
    return SubroutineResult(avg, psi_value(p, avg), K, p.oracle_calls() - calls0, False)


def gradient_mapping_step(p: MinimaxProblem, y: Vector) -> Vector:
    """Exact minimizer over the ball of the two-model upper bound built at y."""
    fy, gf = p.f.evaluate(y)
    gy, gg = p.g_tilde.evaluate(y)
    x, _, _ = _backend.kernels.gradient_mapping(
        _contig(y), _contig(gf), _contig(gg), fy, gy, p.t, p.constant,
        p.ball.center, p.ball.radius)
    return x


def agm_minimax(p: MinimaxProblem, x0: Vector, K: int, exit_below: Optional[float] = None,
                callback: Optional[Callable[[int, Vector], None]] = None) -> SubroutineResult:
    """Generalized accelerated gradient method on psi(t, .); returns x_K.

    With `exit_below`, psi is checked at x_0 and after every step, and the
    loop stops at the first iterate whose psi is at most the threshold.
    """
    K = _require_K(K)
    kern = _backend.kernels
    f, gt, t, L = p.f, p.g_tilde, p.t, p.constant
    c, R = p.ball.center, p.ball.radius
    calls0 = p.oracle_calls()
    x_prev = np.array(x0, dtype=np.float64)
    if exit_below is not None:
        v = psi_value(p, x_prev)
        if v <= exit_below:
            return SubroutineResult(x_prev, v, 0, 0, True)
    y = x_prev
    alpha = 0.5
    v = math.nan
    for k in range(K):
        fy, gf = f.evaluate(y)
        gy, gg = gt.evaluate(y)
        x, _, _ = kern.gradient_mapping(y, _contig(gf), _contig(gg), fy, gy, t, L, c, R)
        alpha_next = next_alpha(alpha)
        beta = momentum(alpha, alpha_next)
        y = x + beta * (x - x_prev)
        x_prev, alpha = x, alpha_next
        if callback is not None:
            callback(k + 1, x)
        if exit_below is not None:
            v = psi_value(p, x)
            if v <= exit_below:
                return SubroutineResult(x, v, k + 1, p.oracle_calls() - calls0, True)
    if exit_below is None:
        v = psi_value(p, x_prev)
    return SubroutineResult(x_prev, v, K, p.oracle_calls() - calls0, False)


def single_level_sgm(h: FirstOrderOracle, ball: Ball, x0: Vector, K: int, constant: float,
                     lower_bound: Optional[float] = None, target: Optional[float] = None,
                     check_every: int = 50) -> tuple[Vector, float]:
    """Projected subgradient method on h with step D / (C sqrt(K)); averaged output.

    If `lower_bound` and `target` are given, stops once h(avg) - lower_bound
    drops to `target` (checked every `check_every` steps).
    """
    K = _require_K(K)
    kern = _backend.kernels
    c, R = ball.center, ball.radius
    eta = ball.diameter / (constant * math.sqrt(K))
    early = lower_bound is not None and target is not None
    x = np.array(x0, dtype=np.float64)
    if early:
        v = h.value(x)
        if v - lower_bound <= target:
            return x, v
    total = np.zeros_like(x)
    for k in range(K):
        total += x
        x = kern.project_ball(_contig(x - eta * h.first_order(x)), c, R)
        if early and (k + 1) % check_every == 0 and k + 1 < K:
            avg = total / (k + 1)
            v = h.value(avg)
            if v - lower_bound <= target:
                return avg, v
    avg = total / K
    return avg, h.value(avg)


def single_level_agm(h: FirstOrderOracle, ball: Ball, x0: Vector, K: int, L: float,
                     lower_bound: Optional[float] = None,
                     target: Optional[float] = None) -> tuple[Vector, float]:
    """Projected accelerated gradient method with the same alpha/beta schedule."""
    K = _require_K(K)
    kern = _backend.kernels
    c, R = ball.center, ball.radius
    early = lower_bound is not None and target is not None
    x_prev = np.array(x0, dtype=np.float64)
    if early:
        v = h.value(x_prev)
        if v - lower_bound <= target:
            return x_prev, v
    y = x_prev
    alpha = 0.5
    for _ in range(K):
        _, gr = h.evaluate(y)
        x = kern.project_ball(_contig(y - gr / L), c, R)
        alpha_next = next_alpha(alpha)
        y = x + momentum(alpha, alpha_next) * (x - x_prev)
        x_prev, alpha = x, alpha_next
        if early:
            v = h.value(x)
            if v - lower_bound <= target:
                return x, v
    return x_prev, h.value(x_prev)


def certified_iterations(setting: Setting, diameter: float, constant: float, eps: float) -> int:
    """Inner iteration count guaranteeing psi_hat <= psi* + eps/2.

    Lipschitz: ceil(4 D^2 C^2 / eps^2). Smooth: ceil(D sqrt(12 L / eps)).
    """
    setting = Setting(setting)
    if setting is Setting.LIPSCHITZ:
        return max(1, math.ceil(4.0 * diameter**2 * constant**2 / eps**2))
    return max(1, math.ceil(diameter * math.sqrt(12.0 * constant / eps)))


def solve_minimax(p: MinimaxProblem, x0: Vector, K: int, **kw) -> SubroutineResult:
    """Dispatch to the setting-appropriate subroutine."""
    if p.setting is Setting.LIPSCHITZ:
        return sgm_minimax(p, x0, K, **kw)
    return agm_minimax(p, x0, K, **kw)
