"""Exception hierarchy.

The CLI maps ``SpecError`` (and subclasses) to exit code 2 and
``NumericalError`` to exit code 3.
"""


class SpecError(ValueError):
    """An economy specification or threshold vector violates an invariant."""


class CapacityError(SpecError):
    """Money supply at or above capacity: ``m >= sum_t f_t k_t``."""


class StateSpaceOverflow(SpecError):
    """The exact chain would exceed the configured state cap."""


class ReducibleChainError(SpecError):
    """The exactly built chain is not irreducible (or not aperiodic)."""


class NumericalError(AssertionError):
    """A numerical cross-check that should hold by construction failed."""
