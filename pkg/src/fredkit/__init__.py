"""Forecast relative error decompositions for nonlinear dynamic models."""
from .affine import AffineModel, compound_a, conditional_log_laplace, conditional_mean, feld_components
from .errors import NumericalError, ValidationError
from .tables import DecompositionTable, assemble_table, normalized_shares

__version__ = "0.1.0"
