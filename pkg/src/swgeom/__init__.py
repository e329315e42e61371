"""Scaling Wasserstein geometry of one-dimensional mixture models."""

from .errors import (
    DegenerateMatching,
    EvaluationError,
    InvalidCoordinates,
    InvalidField,
    InvalidModel,
    InvalidScale,
    MatchingViolation,
    NonConvergent,
    NumericalFailure,
    StiffnessError,
    SwgeomError,
    ValidationError,
)
from .mixtures import ComponentFamily, MixtureModel, SimplexPoint, ThetaCoords

__version__ = "0.1.0"
