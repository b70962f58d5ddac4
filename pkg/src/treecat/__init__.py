"""Exact finite toolkit for algebraic patterns and layered tree categories.

Everything here is strict and set-level: categories are finite with total
composition tables, all checks are exhaustive, and every report is
deterministic given the same inputs.
"""

from .verdicts import Verdict, ContractVerdict
from .fincat import FinCategory, FinFunctor, SetFunctor

__all__ = [
    "Verdict",
    "ContractVerdict",
    "FinCategory",
    "FinFunctor",
    "SetFunctor",
]
