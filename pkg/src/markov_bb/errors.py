"""Exception and warning classes.

Every domain failure derives from :class:`DomainError`, which the CLI maps
to exit code 1. File and parse problems are plain ``OSError``/``ValueError``
and map to exit code 2.
"""


class DomainError(ValueError):
    """Base class for violated mathematical preconditions."""


class ChainError(DomainError):
    """Invalid Markov kernel."""


class RowSumError(ChainError):
    pass


class NotIrreducible(ChainError):
    pass


class NotReversible(ChainError):
    pass


class NegativeInput(DomainError):
    pass


class NotStrictlyPositive(DomainError):
    pass


class NotInRange(DomainError):
    """Right-hand side is not in the range of the mobility operator."""


class IllConditioned(DomainError):
    pass


class InvalidParams(DomainError):
    pass


class StepSizeUnderflow(DomainError):
    """The positivity monitor ran out of step halvings."""


class AtEquilibrium(DomainError):
    pass


class InsufficientData(DomainError):
    pass


class NonConvergence(RuntimeWarning):
    """Optimizer stopped at its iteration cap while still improving."""
