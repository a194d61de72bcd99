"""Model-specific closed-form engines."""
from .counts import BiNbarParams, InarParams, NbarParams
from .linear import CauchyArModel, GaussianVarModel
from .markov import BinaryChainParams, MarkovChain
from .positive import ArgParams, WarParams

__all__ = [
    "ArgParams",
    "BiNbarParams",
    "BinaryChainParams",
    "CauchyArModel",
    "GaussianVarModel",
    "InarParams",
    "MarkovChain",
    "NbarParams",
    "WarParams",
]
