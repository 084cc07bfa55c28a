"""Closed-form Euclidean projections onto a ball and onto ball-hyperplane slices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .core import Ball, InfeasibleSubproblem, InvalidArgument, Vector, as_vector


@dataclass(frozen=True)
class Hyperplane:
    """The affine set ``{x : <normal, x> + offset = 0}``."""

    normal: Vector
    offset: float

    def __post_init__(self):
        w = as_vector(self.normal, "normal").copy()
        if not float(w @ w) > 0:
            raise InvalidArgument("hyperplane normal must be nonzero")
        w.setflags(write=False)
        object.__setattr__(self, "normal", w)
        object.__setattr__(self, "offset", float(self.offset))

    def residual(self, x: Vector) -> float:
        return float(self.normal @ x) + self.offset

    def distance(self, x: Vector) -> float:
        return abs(self.residual(x)) / float(np.linalg.norm(self.normal))

    def project(self, x: Vector) -> Vector:
        w = self.normal
        return x - (self.residual(x) / float(w @ w)) * w


def _check_dim(z: Vector, ball: Ball) -> Vector:
    z = np.ascontiguousarray(z, dtype=np.float64)
    if z.shape != ball.center.shape:
        raise InvalidArgument(f"dimension mismatch: {z.shape} vs ball {ball.center.shape}")
    return z


def project_ball(z: Vector, ball: Ball) -> Vector:
    """Nearest point of `ball` to `z`; `z` itself (copied) when already inside."""
    z = _check_dim(z, ball)
    return _backend.kernels.project_ball(z, ball.center, ball.radius)


def project_ball_hyperplane(z: Vector, ball: Ball, H: Hyperplane) -> Vector:
    """Nearest point of ``ball ∩ H`` to `z`.

    Projects onto H first; if that point leaves the ball, the slice is a
    lower-dimensional ball centered at the center's projection onto H and the
    answer is the radial projection onto it. Raises InfeasibleSubproblem when
    the center is farther than ``R + 1e-10`` (relative) from H.
    """
    z = _check_dim(z, ball)
    if H.normal.shape != z.shape:
        raise InvalidArgument("hyperplane dimension mismatch")
    x, status = _backend.kernels.project_ball_hyperplane(
        z, ball.center, ball.radius, H.normal, H.offset
    )
    if status == 1:
        raise InfeasibleSubproblem(
            f"ball of radius {ball.radius:g} does not meet hyperplane "
            f"(center distance {H.distance(ball.center):g})"
        )
    return x
