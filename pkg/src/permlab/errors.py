"""Exception types shared across the lab."""


class CapacityError(ValueError):
    """The requested size exceeds what an exact routine will attempt."""


class ContractViolation(ValueError):
    """A precondition on the arguments does not hold."""


class TheoremViolation(AssertionError):
    """An invariant that is a theorem (must hold on every instance) failed.

    Raised instead of returning a wrong answer; the experiment runner turns
    it into a nonzero exit status.
    """
