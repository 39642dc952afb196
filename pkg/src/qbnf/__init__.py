"""Quantum Birkhoff normal forms for commuting families of perturbed operators on the torus."""

from .errors import (
    AtomBudgetError, ConfigError, ContractionError, GeneratorMismatch, InvariantViolation,
    LieDivergenceError, PreconditionError, QbnfError, ResonanceError, ShellBudgetError,
)
from .freq import GOLDEN, FrequencyMatrix
from .kam import BnfResult, IterationRecord, KamConfig, classical_run, conjugate_observable, run
from .kernels import BACKEND
from .symbol import Symbol, SymbolSpace, VectorSymbol, bracket, lie_conjugate, norm, op_product

__version__ = "0.1.0"

__all__ = [
    "AtomBudgetError", "BACKEND", "BnfResult", "ConfigError", "ContractionError", "FrequencyMatrix", "GOLDEN",
    "GeneratorMismatch", "InvariantViolation", "IterationRecord", "KamConfig", "LieDivergenceError",
    "PreconditionError", "QbnfError", "ResonanceError", "ShellBudgetError", "Symbol", "SymbolSpace",
    "VectorSymbol", "bracket", "classical_run", "conjugate_observable", "lie_conjugate", "norm",
    "op_product", "run",
]
