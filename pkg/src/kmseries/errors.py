"""Exception hierarchy shared by all modules."""


class KmseriesError(Exception):
    """Base class for all errors raised by this package."""


class PrecisionMismatch(KmseriesError):
    """Arithmetic attempted between values carrying different precisions."""


class DivisionByZeroPole(KmseriesError):
    """A negative-index shifted-factorial factor vanished (pole of the symbol)."""


class PoleAtNonPositiveInteger(KmseriesError):
    """log-gamma evaluated at a non-positive integer."""


class DegenerateNodes(KmseriesError):
    """Vandermonde nodes are not pairwise distinct."""


class PoleInTerm(KmseriesError):
    """A summand's denominator vanished at a lattice point inside the window."""


class Diverged(KmseriesError):
    """Shell maxima grew instead of decaying: the series is not converging."""


class BudgetExceeded(KmseriesError):
    """The summation term budget was exhausted before convergence."""


class ConstraintViolated(KmseriesError):
    """A parameter set does not satisfy an identity's hypotheses."""


class UnknownIdentity(KmseriesError):
    """Identity id not present in the registry."""


class ExhaustedAttempts(KmseriesError):
    """The sampler hit its rejection bound without producing an admissible set."""


class NoDegenerations(KmseriesError):
    """The identity has no documented degenerate parameter sets."""
