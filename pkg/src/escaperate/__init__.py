"""Rate of escape of transient random walks on regular languages and on
amalgamated free products of finite groups."""

from importlib import resources

from .exceptions import (AmalgamError, BadCosets, BadMeasure, BadWeights, BoundaryMissing,
                         EscapeRateError, MalformedRow, NoConvergence, NonDeterministicRate,
                         NotAGroup, NotAHomomorphism, NotTransient, ParseError, RowDefect,
                         SingularSystem, UnknownSymbol)
from .exit_chain import EscapeReport, build_kernel, closed_classes, escape_rate, stationary
from .series import compute_K, compute_xi, differentiate_H, solve_Gbar, solve_H
from .walk import Letter, PairState, RegularLanguageWalk, reachable_pairs, validate_walk

__version__ = "0.1.0"


def data_path(name: str) -> str:
    """Path of a shipped example file, e.g. ``data_path("three_letter_walk.yaml")``."""
    return str(resources.files(__package__).joinpath("data", name))


__all__ = [
    "AmalgamError", "BadCosets", "BadMeasure", "BadWeights", "BoundaryMissing", "EscapeRateError",
    "MalformedRow", "NoConvergence", "NonDeterministicRate", "NotAGroup", "NotAHomomorphism",
    "NotTransient", "ParseError", "RowDefect", "SingularSystem", "UnknownSymbol", "EscapeReport",
    "build_kernel", "closed_classes", "escape_rate", "stationary", "compute_K", "compute_xi",
    "differentiate_H", "solve_Gbar", "solve_H", "Letter", "PairState", "RegularLanguageWalk",
    "reachable_pairs", "validate_walk", "data_path", "__version__",
]
