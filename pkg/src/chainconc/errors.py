"""Exception types shared across the package."""


class ChainConcError(Exception):
    """Base class for every error raised by this library."""


class NonStochastic(ChainConcError):
    """A transition-matrix row is negative or its sum is off 1 by more than 1e-9."""


class NotStationary(ChainConcError):
    """The supplied law does not satisfy pi A = pi within tolerance."""


class ZeroMassState(ChainConcError):
    """A probability vector has a nonpositive entry; full support is required."""


class Reducible(ChainConcError):
    """The stationary law is not unique, or it puts zero mass on some state."""


class ParamOutOfRange(ChainConcError):
    """A parameter lies outside its documented domain."""


class BudgetExceeded(ChainConcError):
    """The requested exact computation is larger than the allowed budget."""


class OddExponent(ChainConcError):
    """Moment-recursion route needs an even order; use the distribution route."""


class NotLattice(ChainConcError):
    """The observable has no arithmetic-lattice structure."""


class NotCentered(ChainConcError):
    """The operation requires an observable with zero stationary mean."""


class PreconditionViolated(ChainConcError):
    """An inequality check was invoked outside its stated hypotheses."""


class GapClosed(ChainConcError):
    """The chain has lambda >= 1, so the gap-based bounds do not apply."""


class DomainViolated(ChainConcError):
    """The deviation parameter is outside the bound's validity range."""


class RegimeUnsupported(ChainConcError):
    """The (p, q) exponent combination is outside the supported regime."""


class ChainSpecError(ChainConcError):
    """A chain specification file is malformed."""
