"""Exception types raised across the package."""


class KonusError(Exception):
    """Base class for all library errors."""


class BasketError(KonusError, ValueError):
    """A basket has the wrong dimension or a non-positive coordinate."""


class GaugeDomainError(KonusError, ValueError):
    """A tabulated gauge map was evaluated outside its knot range."""


class NotSameFoliation(KonusError):
    """Two utilities do not share indifference sets, so no gauge map relates them."""


class NonMonotone(KonusError):
    """Paired utility values cannot be joined by an increasing map."""


class LevelSetError(KonusError):
    """A ray from the origin never attains the requested utility level."""


class NonConvergence(KonusError):
    """An iterative solver stopped before reaching its tolerance."""


class FlowEscape(KonusError):
    """A cost trajectory left the positive half-line or overflowed."""


class TimeMismatch(KonusError, ValueError):
    """Cost adjustments were combined over incompatible time spans."""


class IndexConsistencyError(KonusError):
    """The basket-price route and the adjusted-cost route of an index disagree."""
