"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`FermiError`,
so callers (and the CLI) can separate contract violations from bugs.
"""

from __future__ import annotations

__all__ = [
    "FermiError",
    "AlgebraError",
    "GradingNotInvolutive",
    "NotHomogeneous",
    "NotClosed",
    "DependentBasis",
    "NoUnit",
    "UnknownPreset",
    "StateError",
    "NotPositive",
    "NotNormalized",
    "NotHermitian",
    "NotInvariant",
    "DegenerateState",
    "NeitherEven",
    "NotEvenFactor",
    "NotSymmetric",
    "NotOdd",
    "SiteOutOfRange",
    "InsufficientSites",
    "NotABijection",
    "BudgetExceeded",
    "EmptyGrid",
    "ConvergenceError",
]


class FermiError(Exception):
    """Base class for all package errors."""


# -- algebra construction ---------------------------------------------------

class AlgebraError(FermiError, ValueError):
    """An algebra description violates one of the graded *-algebra axioms."""


class GradingNotInvolutive(AlgebraError):
    pass


class NotHomogeneous(AlgebraError):
    pass


class NotClosed(AlgebraError):
    pass


class DependentBasis(AlgebraError):
    pass


class NoUnit(AlgebraError):
    pass


class UnknownPreset(AlgebraError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


# -- states -------------------------------------------------------------------

class StateError(FermiError, ValueError):
    pass


class NotPositive(StateError):
    pass


class NotNormalized(StateError):
    pass


class NotHermitian(StateError):
    pass


class NotInvariant(StateError):
    pass


class DegenerateState(StateError):
    pass


class NeitherEven(StateError):
    """Both factors of a product functional are non-even, so it is not positive."""


class NotEvenFactor(StateError):
    pass


class NotSymmetric(StateError):
    pass


class NotOdd(StateError):
    pass


# -- sites, permutations, budgets -------------------------------------------

class SiteOutOfRange(FermiError, IndexError):
    pass


class InsufficientSites(FermiError, ValueError):
    pass


class NotABijection(FermiError, ValueError):
    pass


class BudgetExceeded(FermiError, RuntimeError):
    """A computation would exceed its configured size budget."""


class EmptyGrid(FermiError, ValueError):
    pass


class ConvergenceError(FermiError, RuntimeError):
    """An iterative solver did not reach its tolerance within the iteration budget."""
