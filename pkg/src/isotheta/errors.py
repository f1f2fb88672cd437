"""Exception taxonomy shared by all numerical modules."""


class IsothetaError(Exception):
    """Base class for all library errors."""


class DomainError(IsothetaError, ValueError):
    """Input outside the mathematical domain (bad modulus, degenerate curve, ...)."""


class ArgumentError(IsothetaError, ValueError):
    """Structurally invalid argument (wrong shape, non-half-integer char, ...)."""


class PoleError(IsothetaError, ValueError):
    """Evaluation point collides with a pole or a branch cut."""


class ConvergenceError(IsothetaError, RuntimeError):
    """A truncated series or iteration exceeded its configured cap."""


class PrecisionError(IsothetaError, RuntimeError):
    """A refinement/doubling check failed to reach the requested tolerance."""


class PathError(IsothetaError, ValueError):
    """A path violates clearance constraints or cannot be routed."""


class LatticeError(IsothetaError, RuntimeError):
    """A half-period solve did not land on the half-integer lattice."""


class DegeneracyError(IsothetaError, RuntimeError):
    """A genericity assumption failed (vanishing theta value, zero eigenvector, ...)."""
