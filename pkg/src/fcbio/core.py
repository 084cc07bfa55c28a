"""Shared types: vectors, first-order oracles, balls and bilevel problems."""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

Vector = NDArray[np.float64]


class FCBiOError(Exception):
    """Base class for errors raised by this package."""


class InvalidArgument(FCBiOError, ValueError):
    pass


class InfeasibleSubproblem(FCBiOError):
    """A projection target set is empty."""


class BracketInversion(FCBiOError):
    """Initial bisection bracket has u < l."""


class InvalidBudget(FCBiOError, ValueError):
    pass


class InvalidData(FCBiOError, ValueError):
    pass


class SingularSystem(FCBiOError):
    pass


class OracleBudgetExhausted(FCBiOError):
    """Raised by a capped oracle once its first-order call allowance is spent."""


def as_vector(x, name: str = "x") -> Vector:
    """Return `x` as a finite 1-D float64 array (copying only when needed)."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1 or v.size == 0:
        raise InvalidArgument(f"{name} must be a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidArgument(f"{name} has non-finite entries")
    return v


class Setting(str, enum.Enum):
    LIPSCHITZ = "lipschitz"
    SMOOTH = "smooth"


class FirstOrderOracle:
    """Value and (sub)gradient evaluator with call accounting.

    ``calls`` counts first-order invocations (``first_order`` and
    ``evaluate``); ``value_calls`` counts value-only invocations. Counters are
    guarded by a lock so an oracle can be shared between threads.
    """

    def __init__(
        self,
        fun: Callable[[Vector], float],
        grad: Callable[[Vector], Vector],
        label: str = "h",
        fun_and_grad: Optional[Callable[[Vector], tuple[float, Vector]]] = None,
    ):
        self._fun = fun
        self._grad = grad
        self._fun_and_grad = fun_and_grad
        self.label = label
        self._lock = threading.Lock()
        self._calls = 0
        self._value_calls = 0

    @property
    def calls(self) -> int:
        return self._calls

    @property
    def value_calls(self) -> int:
        return self._value_calls

    def reset_counts(self) -> None:
        with self._lock:
            self._calls = 0
            self._value_calls = 0

    def _count(self, first_order: bool) -> None:
        with self._lock:
            if first_order:
                self._calls += 1
            else:
                self._value_calls += 1

    def value(self, x: Vector) -> float:
        self._count(False)
        return float(self._fun(x))

    def first_order(self, x: Vector) -> Vector:
        self._count(True)
        return self._grad(x)

    def evaluate(self, x: Vector) -> tuple[float, Vector]:
        """Value and first-order output at `x`; counts one first-order call."""
        self._count(True)
        if self._fun_and_grad is not None:
            v, g = self._fun_and_grad(x)
            return float(v), g
        return float(self._fun(x)), self._grad(x)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.label!r}, calls={self.calls})"


class DerivedOracle(FirstOrderOracle):
    """Affine transform ``scale * base(x) + shift`` of another oracle.

    Counting is delegated: invoking the derived oracle increments the base
    oracle's counters, and ``calls``/``value_calls`` read them back.
    """

    def __init__(self, base: FirstOrderOracle, scale: float = 1.0, shift: float = 0.0,
                 label: Optional[str] = None):
        self.base = base
        self.scale = float(scale)
        self.shift = float(shift)
        self.label = label or base.label
        self._lock = base._lock

    @property
    def calls(self) -> int:
        return self.base.calls

    @property
    def value_calls(self) -> int:
        return self.base.value_calls

    def reset_counts(self) -> None:
        self.base.reset_counts()

    def value(self, x: Vector) -> float:
        return self.scale * self.base.value(x) + self.shift

    def first_order(self, x: Vector) -> Vector:
        s = self.base.first_order(x)
        return s if self.scale == 1.0 else self.scale * s

    def evaluate(self, x: Vector) -> tuple[float, Vector]:
        v, s = self.base.evaluate(x)
        if self.scale == 1.0:
            return v + self.shift, s
        return self.scale * v + self.shift, self.scale * s


def relaxed_constraint(g: FirstOrderOracle, g_hat_star: float) -> FirstOrderOracle:
    """The relaxed lower-level constraint ``g(x) - g_hat_star``."""
    g_hat_star = float(g_hat_star)
    if not np.isfinite(g_hat_star):
        raise InvalidArgument("g_hat_star must be finite")
    return DerivedOracle(g, 1.0, -g_hat_star, label=f"{g.label}~")


def scale_oracle(h: FirstOrderOracle, c: float) -> FirstOrderOracle:
    """Multiply both value and subgradient of `h` by ``c > 0``."""
    c = float(c)
    if not c > 0 or not np.isfinite(c):
        raise InvalidArgument(f"scale must be a positive finite real, got {c}")
    return DerivedOracle(h, c, 0.0, label=f"{c:g}*{h.label}")


def zero_oracle(n: int, label: str = "0") -> FirstOrderOracle:
    return FirstOrderOracle(lambda x: 0.0, lambda x: np.zeros(n), label=label,
                            fun_and_grad=lambda x: (0.0, np.zeros(n)))


@dataclass(frozen=True)
class Ball:
    """Euclidean ball ``B(center, radius)``; ``diameter`` is ``2 * radius``."""

    center: Vector
    radius: float

    def __post_init__(self):
        c = as_vector(self.center, "center").copy()
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        r = float(self.radius)
        if not r > 0 or not np.isfinite(r):
            raise InvalidArgument(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "radius", r)

    @classmethod
    def origin(cls, n: int, radius: float) -> "Ball":
        return cls(np.zeros(n), radius)

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def contains(self, x: Vector, tol: float = 1e-10) -> bool:
        return float(np.linalg.norm(x - self.center)) <= self.radius + tol

    def project(self, z: Vector) -> Vector:
        from .geometry import project_ball

        return project_ball(z, self)


@dataclass(frozen=True)
class Tolerances:
    eps_f: float
    eps_g: float

    def __post_init__(self):
        for name in ("eps_f", "eps_g"):
            v = float(getattr(self, name))
            if not v > 0 or not np.isfinite(v):
                raise InvalidArgument(f"{name} must be strictly positive, got {v}")
            object.__setattr__(self, name, v)

    @classmethod
    def uniform(cls, eps: float) -> "Tolerances":
        return cls(eps, eps)


@dataclass(frozen=True)
class GroundTruth:
    x_star: Optional[Vector]
    f_star: float
    g_star: float


@dataclass
class BilevelProblem:
    """min f(x) over x in argmin_{z in ball} g(z).

    ``f_const``/``g_const`` are Lipschitz constants in the Lipschitz setting
    and smoothness constants in the smooth setting.
    """

    f: FirstOrderOracle
    g: FirstOrderOracle
    ball: Ball
    setting: Setting
    f_const: float
    g_const: float
    ground_truth: Optional[GroundTruth] = None
    name: str = "custom"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.setting = Setting(self.setting)
        for name in ("f_const", "g_const"):
            v = float(getattr(self, name))
            if not v > 0 or not np.isfinite(v):
                raise InvalidArgument(f"{name} must be positive, got {v}")
            setattr(self, name, v)

    @property
    def dim(self) -> int:
        return self.ball.dim

    def oracle_calls(self) -> int:
        return self.f.calls + self.g.calls


class TraceRow(NamedTuple):
    outer_iter: int
    inner_iter: int
    oracle_calls: int
    t: float
    psi_hat: float
    f: float
    g: float
    wall_seconds: float


TRACE_HEADER = "outer_iter,inner_iter,oracle_calls,t,psi_hat,f,g,wall_seconds"


@dataclass
class SolveReport:
    solution: Vector
    f_value: float
    g_value: float
    trace: list[TraceRow]
    g_hat_star: float
    bracket_history: list[tuple[float, float]]
    bracket_widths: list[float] = field(default_factory=list)
    rounds: int = 0
    inner_budget: int = 0
    eps_f: float = float("nan")
    eps_g: float = float("nan")
    f_calls: int = 0
    g_calls: int = 0
    value_calls: int = 0
    wall_seconds: float = 0.0
    truncated: bool = False
    u_never_updated: bool = False
    round_starts: list[Vector] = field(default_factory=list)
    round_outputs: list[Vector] = field(default_factory=list)
    round_psi: list[float] = field(default_factory=list)

    @property
    def oracle_calls(self) -> int:
        return self.f_calls + self.g_calls

    def write_trace(self, path_or_file) -> None:
        write_trace(self.trace, path_or_file)


def _fmt(v: float) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_trace(rows: Sequence[TraceRow], path_or_file) -> None:
    lines = [TRACE_HEADER]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w") as fh:
            fh.write(text)
