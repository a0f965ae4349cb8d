"""Nonlinear second-order cone programming: cone primitives, first-order
solvers, and constraint-qualification analyzers with a fixture corpus."""

__version__ = "0.1.0"

from .cone import SocVector, SpectralDecomposition, ConeMembership  # noqa: F401
from .model import ProblemSpec, Multipliers, KktResidual, IterateLog  # noqa: F401
from .cq import CqStatus, CqVerdict, SearchBudget  # noqa: F401
from .solvers import SolverConfig  # noqa: F401
