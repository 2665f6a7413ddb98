"""Locally private multinomial and density estimation with minimax diagnostics."""

from .core import (
    SQRT2,
    PiecewiseConstantDensity,
    PrivacyBudget,
    RngStream,
    SeriesDensity,
    SimplexVector,
    SobolevClass,
    basis_matrix,
    l2_distance_squared,
    project_simplex,
    trig_basis_eval,
)
from .channels import ChannelConfig, PrivatizedRecord, audit_channel, compute_ck, privatize
from .estimators import estimate

__all__ = [
    "SQRT2",
    "ChannelConfig",
    "PiecewiseConstantDensity",
    "PrivacyBudget",
    "PrivatizedRecord",
    "RngStream",
    "SeriesDensity",
    "SimplexVector",
    "SobolevClass",
    "audit_channel",
    "basis_matrix",
    "compute_ck",
    "estimate",
    "l2_distance_squared",
    "privatize",
    "project_simplex",
    "trig_basis_eval",
]

__version__ = "0.1.0"
