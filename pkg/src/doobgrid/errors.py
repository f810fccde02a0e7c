"""Exception vocabulary shared by all modules."""


class DoobgridError(Exception):
    """Base class for all library errors."""


class BadWeights(DoobgridError):
    """Probability weights are nonpositive or do not sum to one."""


class NonRefining(DoobgridError):
    """A partition coarsens as time advances."""


class IndexOutOfGrid(DoobgridError):
    """A grid index or time lies outside the master grid."""


class OutOfRange(DoobgridError):
    """A time argument lies outside its admissible interval."""


class LevelTooHigh(DoobgridError):
    """A dyadic level exceeds the master level."""


class NotAdapted(DoobgridError):
    """A process value is not measurable at its own time."""


class NonzeroStart(DoobgridError):
    """An operation requires the process to start at zero."""


class NotIncreasing(DoobgridError):
    """A path or sequence fails to be (weakly) increasing."""


class BadPartition(DoobgridError):
    """A deterministic partition of [0, 1] is malformed."""


class NoAccumulationPoint(DoobgridError):
    """No accumulation point can be extracted (non-finite inputs)."""


class HypothesisViolated(DoobgridError):
    """A precondition of the dominated-subsequence lemma fails."""


class NotFiniteVariation(DoobgridError):
    """A path contains non-finite values."""


class NotSubmartingale(DoobgridError):
    """The process is not a submartingale along the required grid."""


class ZeroInClosure(DoobgridError):
    """The target set has zero distance to the origin."""


class ZeroInF(DoobgridError):
    """The jump-size set contains zero."""


class NotPredictableInput(DoobgridError):
    """The stopping-time indicator is not grid-predictable."""


class EmptyList(DoobgridError):
    """An operation received an empty sequence."""


class NotMartingale(DoobgridError):
    """A process expected to be a martingale is not one."""


class NotDecomposable(DoobgridError):
    """No canonical martingale-plus-trend decomposition exists."""


class NotAnnounceable(DoobgridError):
    """A stopping time has no valid announcing certificate."""


class BadConfig(DoobgridError):
    """A scenario configuration is invalid."""


class IoError(DoobgridError):
    """A report could not be written."""
