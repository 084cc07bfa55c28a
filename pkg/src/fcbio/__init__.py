"""First-order solver for simple bilevel problems over a Euclidean ball."""

from . import _backend
from .core import (
    Ball,
    BilevelProblem,
    BracketInversion,
    FCBiOError,
    FirstOrderOracle,
    GroundTruth,
    InfeasibleSubproblem,
    InvalidArgument,
    InvalidBudget,
    InvalidData,
    OracleBudgetExhausted,
    Setting,
    SingularSystem,
    SolveReport,
    Tolerances,
    relaxed_constraint,
    scale_oracle,
)
from .driver import Bracket, BudgetPolicy, certify, fc_bio, initialize
from .geometry import Hyperplane, project_ball, project_ball_hyperplane
from .subroutines import MinimaxProblem, agm_minimax, sgm_minimax

__all__ = [
    "Ball", "BilevelProblem", "Bracket", "BracketInversion", "BudgetPolicy", "FCBiOError",
    "FirstOrderOracle", "GroundTruth", "Hyperplane", "InfeasibleSubproblem", "InvalidArgument",
    "InvalidBudget", "InvalidData", "MinimaxProblem", "OracleBudgetExhausted", "Setting",
    "SingularSystem", "SolveReport", "Tolerances", "agm_minimax", "certify", "fc_bio",
    "initialize", "project_ball", "project_ball_hyperplane", "relaxed_constraint",
    "scale_oracle", "sgm_minimax", "backend",
]


def backend() -> str:
    """Name of the active kernel backend ("compiled" or "python")."""
    return _backend.current()
