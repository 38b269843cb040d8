"""Kicked golden-mean rotor: classical diffusion vs quantum localisation."""

__version__ = "0.1.0"

from .classical import ClassicalState, ModelParams, PiecewiseLinear, TrinomialModel  # noqa: E402
from .goldenmean import Convergent, FibDecomposition  # noqa: E402
from .quantum import ConfigurationError, KickMultiplier, QuantumState  # noqa: E402
from .quasiconjugacy import Region  # noqa: E402

__all__ = [
    "ClassicalState",
    "ConfigurationError",
    "Convergent",
    "FibDecomposition",
    "KickMultiplier",
    "ModelParams",
    "PiecewiseLinear",
    "QuantumState",
    "Region",
    "TrinomialModel",
]
