"""Exception hierarchy shared by all reactime modules."""


class ReactimeError(Exception):
    """Base class for all errors raised by this package."""


# --- kernel validation -------------------------------------------------

class NonStochasticRow(ReactimeError):
    """A row of the transition matrix does not sum to one."""


class EmptyPartitionSide(ReactimeError):
    """One side of the A/B partition contains no state."""


class NoAccess(ReactimeError):
    """One of the cross blocks is identically zero, so the other side
    of the partition can never be reached."""


class Reducible(ReactimeError):
    """The kernel is not irreducible (several invariant measures)."""


# --- measures and linear solves ----------------------------------------

class NullMass(ReactimeError):
    """Conditioning on a set of zero measure."""


class ZeroMeasure(ReactimeError):
    """An operation received the zero measure where a nonzero
    nonnegative measure is required."""


class SingularSystem(ReactimeError):
    """A linear system that should be invertible is numerically
    singular; the sub-block has no escape route."""


class Extinct(ReactimeError):
    """Survival probability underflowed to zero."""


# --- quasi-stationary distributions ------------------------------------

class DegenerateKilling(ReactimeError):
    """Some state leaves the retained set with probability one, so the
    killed kernel has a degenerate (theta = 0) direction."""


class ComplexDominant(ReactimeError):
    """The dominant eigenvalue of the killed kernel is not real, which
    signals a modeling error."""


class ZeroMean(ReactimeError):
    """The test function averages to zero against the conditioned
    stationary measure, so the relative bound is undefined."""


class InvariantViolation(ReactimeError):
    """A mathematical identity that must hold for valid inputs failed
    beyond tolerance; indicates inconsistent inputs or a bug."""


# --- Birkhoff certification ---------------------------------------------

class NoCertificate(ReactimeError):
    """No strictly positive two-sided envelope exists for this block
    (it has a zero entry in a column that is not identically zero)."""


class NonPositiveIterate(ReactimeError):
    """Power iteration produced a non-positive iterate (underflow)."""


# --- simulation ----------------------------------------------------------

class BlowUp(ReactimeError):
    """A trajectory left the guard radius."""


class TooFewEvents(ReactimeError):
    """Not enough completed transitions to form an estimate."""


class NoSuccess(ReactimeError):
    """No successful trajectory available for reactive statistics."""


class ConfigError(ReactimeError):
    """Invalid or unsupported experiment configuration."""
