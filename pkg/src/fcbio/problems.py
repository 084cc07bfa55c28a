"""Problem instances: experiment problems, zero-chains and hard instances."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _backend
from .core import (
    Ball,
    BilevelProblem,
    FirstOrderOracle,
    GroundTruth,
    InvalidArgument,
    InvalidData,
    Setting,
    Vector,
    zero_oracle,
)


@dataclass(frozen=True)
class ChainSpec:
    q: int
    constant: float
    R: float

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 1:
            raise InvalidArgument(f"q must be a positive integer, got {self.q}")
        if not self.constant > 0 or not self.R > 0:
            raise InvalidArgument("chain constant and R must be positive")
        object.__setattr__(self, "q", int(self.q))
        object.__setattr__(self, "constant", float(self.constant))
        object.__setattr__(self, "R", float(self.R))


@dataclass
class DesignMatrix:
    """Dense data matrix `A` (m x n) with response or label vector `b`."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.A = np.ascontiguousarray(self.A, dtype=np.float64)
        self.b = np.ascontiguousarray(self.b, dtype=np.float64).reshape(-1)
        if self.A.ndim != 2 or self.A.shape[0] < 1 or self.A.shape[1] < 1:
            raise InvalidData(f"A must be a non-empty matrix, got shape {self.A.shape}")
        if self.b.shape[0] != self.A.shape[0]:
            raise InvalidData(f"b has length {self.b.shape[0]}, expected {self.A.shape[0]}")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.b))):
            raise InvalidData("data contains non-finite entries")

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def check_labels(self) -> None:
        bad = ~np.isin(self.b, (-1.0, 1.0))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise InvalidData(f"label {self.b[i]!r} at row {i + 1} is not in {{-1, +1}}")


# -- zero-chains ---------------------------------------------------------------

def make_smooth_chain(spec: ChainSpec, label: str = "h") -> FirstOrderOracle:
    """Convex L-smooth zero-chain h_{q,L,R} with a tridiagonal Hessian."""
    L, R = spec.constant, spec.R

    def fg(x):
        return _backend.kernels.smooth_chain(np.ascontiguousarray(x, dtype=np.float64), L, R)

    return FirstOrderOracle(lambda x: fg(x)[0], lambda x: fg(x)[1], label=label, fun_and_grad=fg)


def smooth_chain_minimizer(spec: ChainSpec) -> Vector:
    j = np.arange(1, spec.q + 1, dtype=np.float64)
    return spec.R * (1.0 - j / (spec.q + 1))


def smooth_chain_min_value(spec: ChainSpec) -> float:
    return -spec.constant * spec.R**2 / 8.0 * spec.q / (spec.q + 1)


def make_lipschitz_chain(spec: ChainSpec, label: str = "r") -> FirstOrderOracle:
    """Nonsmooth zero-chain r_{q,C,R}; C-Lipschitz on B(0, R).

    The max term contributes the basis vector of the smallest index attaining
    the maximum, which keeps at most one new coordinate per oracle call.
    """
    C, R = spec.constant, spec.R

    def fg(x):
        return _backend.kernels.lipschitz_chain(np.ascontiguousarray(x, dtype=np.float64), C, R)

    return FirstOrderOracle(lambda x: fg(x)[0], lambda x: fg(x)[1], label=label, fun_and_grad=fg)


def lipschitz_chain_minimizer(spec: ChainSpec) -> Vector:
    return np.full(spec.q, -spec.R / math.sqrt(spec.q))


def lipschitz_chain_min_value(spec: ChainSpec) -> float:
    return -spec.constant * spec.R / (2.0 * (1.0 + math.sqrt(spec.q)))


def _tail_quadratic(q: int, T: int) -> FirstOrderOracle:
    """f(x) = 0.5 * sum_{j > T} x_j^2 (1-based j)."""

    def fg(x):
        g = np.zeros(q)
        g[T:] = x[T:]
        return 0.5 * float(x[T:] @ x[T:]), g

    return FirstOrderOracle(lambda x: fg(x)[0], lambda x: fg(x)[1], label="f", fun_and_grad=fg)


def _check_T(T) -> int:
    if int(T) != T or T < 1:
        raise InvalidArgument(f"T must be a positive integer, got {T}")
    return int(T)


def make_smooth_hard_instance(T: int) -> BilevelProblem:
    """(1,1)-smooth instance on which f stays at f(0) = 0 for T zero-respecting steps."""
    T = _check_T(T)
    q = 2 * T
    spec = ChainSpec(q, 1.0, 1.0 / math.sqrt(q))
    x_star = smooth_chain_minimizer(spec)
    f_star = (T + 1) / (24.0 * (2 * T + 1))
    gt = GroundTruth(x_star, f_star, smooth_chain_min_value(spec))
    return BilevelProblem(_tail_quadratic(q, T), make_smooth_chain(spec, "g"), Ball.origin(q, 1.0),
                          Setting.SMOOTH, 1.0, 1.0, ground_truth=gt, name="hard_smooth",
                          meta={"T": T})


def make_lipschitz_hard_instance(T: int) -> BilevelProblem:
    """(1,1)-Lipschitz instance; f* = 1/4 while f stays at 0 for T steps."""
    T = _check_T(T)
    q = 2 * T
    spec = ChainSpec(q, 1.0, 1.0)
    gt = GroundTruth(lipschitz_chain_minimizer(spec), 0.25, lipschitz_chain_min_value(spec))
    return BilevelProblem(_tail_quadratic(q, T), make_lipschitz_chain(spec, "g"),
                          Ball.origin(q, 1.0), Setting.LIPSCHITZ, 1.0, 1.0, ground_truth=gt,
                          name="hard_lipschitz", meta={"T": T})


def make_lower_bound_instance(setting, level: str, T: int, constant: float = 1.0,
                              D: float = 1.0) -> BilevelProblem:
    """Chain on one level and the zero function on the other, over B(0, D).

    Smooth: chain h_{2T+1, L, D}; Lipschitz: chain r_{T, C, D}. The ground
    truth is the chain's unconstrained minimizer and minimum value.
    """
    setting = Setting(setting)
    T = _check_T(T)
    if level not in ("upper", "lower"):
        raise InvalidArgument(f"level must be 'upper' or 'lower', got {level!r}")
    if setting is Setting.SMOOTH:
        spec = ChainSpec(2 * T + 1, constant, D)
        chain = make_smooth_chain(spec, "f" if level == "upper" else "g")
        x_star, h_star = smooth_chain_minimizer(spec), smooth_chain_min_value(spec)
    else:
        spec = ChainSpec(T, constant, D)
        chain = make_lipschitz_chain(spec, "f" if level == "upper" else "g")
        x_star, h_star = lipschitz_chain_minimizer(spec), lipschitz_chain_min_value(spec)
    zero = zero_oracle(spec.q, "g" if level == "upper" else "f")
    if level == "upper":
        f, g, gt = chain, zero, GroundTruth(x_star, h_star, 0.0)
    else:
        f, g, gt = zero, chain, GroundTruth(x_star, 0.0, h_star)
    return BilevelProblem(f, g, Ball.origin(spec.q, D), setting, spec.constant, spec.constant,
                          ground_truth=gt, name=f"lower_bound_{setting.value}_{level}",
                          meta={"T": T, "chain": spec})


# -- experiment problems -------------------------------------------------------

def lambda_max(A: np.ndarray, max_iter: int = 1000, rtol: float = 1e-10) -> float:
    """Largest eigenvalue of A^T A by power iteration from the normalized ones vector."""
    n = A.shape[1]
    v = np.full(n, 1.0 / math.sqrt(n))
    lam = 0.0
    for _ in range(max_iter):
        Av = A @ v
        new = float(Av @ Av)
        w = A.T @ Av
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v = w / nw
        if lam > 0 and abs(new - lam) <= rtol * new:
            lam = new
            break
        lam = new
    Av = A @ v
    return max(lam, float(Av @ Av))


_L_FLOOR = 1e-12


def _smoothness(A: np.ndarray, scale: float, meta: dict, key: str) -> float:
    L = scale * lambda_max(A)
    if L < _L_FLOOR:
        warnings.warn(f"{key}: data matrix is (numerically) zero; using L = {_L_FLOOR}")
        meta[f"{key}_floored"] = True
        L = _L_FLOOR
    return L


def make_min_norm_problem(data: DesignMatrix, radius: float) -> BilevelProblem:
    """f(x) = 0.5|x|^2, g(x) = 0.5|Ax - b|^2 over B(0, radius); smooth setting."""
    A, b = data.A, data.b
    n = A.shape[1]

    def f_fg(x):
        return 0.5 * float(x @ x), x.copy()

    def g_fg(x):
        r = A @ x - b
        return 0.5 * float(r @ r), A.T @ r

    f = FirstOrderOracle(lambda x: 0.5 * float(x @ x), lambda x: x.copy(), "f", f_fg)
    g = FirstOrderOracle(lambda x: g_fg(x)[0], lambda x: g_fg(x)[1], "g", g_fg)
    meta: dict = {}
    L_g = _smoothness(A, 1.0, meta, "L_g")
    return BilevelProblem(f, g, Ball.origin(n, radius), Setting.SMOOTH, 1.0, L_g,
                          name="min_norm", meta=meta)


def logistic_loss(A: np.ndarray, y: np.ndarray, x: Vector) -> tuple[float, Vector]:
    """Mean of log(1 + exp(-y_i a_i.x)) and its gradient."""
    z = y * (A @ x)
    pos = z > 0
    loss = np.empty_like(z)
    loss[pos] = np.log1p(np.exp(-z[pos]))
    loss[~pos] = -z[~pos] + np.log1p(np.exp(z[~pos]))
    # sigma(-z) = 1 / (1 + e^z), evaluated without overflow
    s = np.empty_like(z)
    e = np.exp(-z[pos])
    s[pos] = e / (1.0 + e)
    s[~pos] = 1.0 / (1.0 + np.exp(z[~pos]))
    m = A.shape[0]
    # shifted mean: exact when all losses agree (e.g. log 2 at x = 0)
    mean = float(loss[0]) + math.fsum(loss - loss[0]) / m
    return mean, -(A.T @ (y * s)) / m


def make_logistic_problem(train: DesignMatrix, val: DesignMatrix, radius: float) -> BilevelProblem:
    """f = mean validation logistic loss, g = mean training logistic loss."""
    train.check_labels()
    val.check_labels()
    if train.A.shape[1] != val.A.shape[1]:
        raise InvalidData("train and validation feature dimensions differ")
    n = train.A.shape[1]

    def f_fg(x):
        return logistic_loss(val.A, val.b, x)

    def g_fg(x):
        return logistic_loss(train.A, train.b, x)

    f = FirstOrderOracle(lambda x: f_fg(x)[0], lambda x: f_fg(x)[1], "f", f_fg)
    g = FirstOrderOracle(lambda x: g_fg(x)[0], lambda x: g_fg(x)[1], "g", g_fg)
    meta: dict = {}
    L_f = _smoothness(val.A, 0.25 / val.A.shape[0], meta, "L_f")
    L_g = _smoothness(train.A, 0.25 / train.A.shape[0], meta, "L_g")
    return BilevelProblem(f, g, Ball.origin(n, radius), Setting.SMOOTH, L_f, L_g,
                          name="logistic", meta=meta)


# -- synthetic data ------------------------------------------------------------

def synthetic_min_norm(m: int, n: int, seed: int) -> DesignMatrix:
    """Gaussian A with N(0, 1/m) entries and a consistent right-hand side.

    b = A x_p for a planted x_p with N(0, 1/n) entries, so Ax = b is solvable
    and the minimum-norm solution has norm at most |x_p| (about 1).
    """
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n)) / math.sqrt(m)
    x_p = rng.standard_normal(n) / math.sqrt(n)
    return DesignMatrix(A, A @ x_p)


def synthetic_logistic(m: int, n: int, seed: int, flip: float = 0.05,
                       split: Optional[int] = None) -> tuple[DesignMatrix, DesignMatrix]:
    """Train/validation split of labels from a planted linear classifier.

    Rows have N(0, 1/n) features; a fraction `flip` of labels is flipped so
    the data is only nearly separable. The first `split` rows (default m//2)
    form the training set.
    """
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n)) / math.sqrt(n)
    w = rng.standard_normal(n) * 3.0
    y = np.where(A @ w >= 0, 1.0, -1.0)
    y[rng.random(m) < flip] *= -1.0
    k = m // 2 if split is None else split
    return DesignMatrix(A[:k], y[:k]), DesignMatrix(A[k:], y[k:])
