"""Exception hierarchy shared by all modules."""


class ProperRegretError(Exception):
    """Base class for every error raised by this package."""


class InputError(ProperRegretError, ValueError):
    """Malformed numeric input (non-finite values, wrong shape, off-simplex)."""


class DomainError(ProperRegretError, ValueError):
    """An argument lies outside the domain of the requested function."""


class InfeasiblePairError(ProperRegretError, ValueError):
    """No pair at the requested distance exists along the given chord."""


class BudgetError(ProperRegretError, RuntimeError):
    """A grid or search would exceed the configured size cap."""


class UnsupportedError(ProperRegretError, NotImplementedError):
    """No closed form is available for this generator / norm combination."""


class NonInvertibleError(ProperRegretError, ValueError):
    """A modulus curve is not strictly increasing and cannot be inverted."""


class DegenerateError(ProperRegretError, ValueError):
    """A ratio would divide by a (numerically) vanishing modulus."""
