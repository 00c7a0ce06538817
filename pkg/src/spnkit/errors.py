"""Exception and warning types shared across the package."""


class SpnError(Exception):
    """Base class for all errors raised by this package."""


# --- graph construction ---------------------------------------------------


class CycleDetected(SpnError):
    pass


class UnknownReference(SpnError):
    pass


class EmptyChildren(SpnError):
    pass


class NonNormalizedWeights(SpnError):
    pass


class NegativeWeight(SpnError):
    pass


class NonPositiveVariance(SpnError):
    pass


class InvalidLeaf(SpnError):
    """Leaf declaration inconsistent with its variable (kind or state)."""


# --- evaluation -----------------------------------------------------------


class EvidenceTypeMismatch(SpnError):
    pass


class UnknownNode(SpnError):
    pass


class UnknownVariable(SpnError):
    pass


# --- augmentation ---------------------------------------------------------


class NotASum(SpnError):
    pass


class InvalidInputSpn(SpnError):
    pass


class NotAnLv(SpnError):
    pass


class StateOutOfRange(SpnError):
    pass


class AlreadyAugmented(SpnError):
    pass


# --- EM -------------------------------------------------------------------


class ZeroProbabilityRecord(SpnError):
    pass


class AllRecordsZero(SpnError):
    pass


class EmptyMass(SpnError):
    pass


class DegenerateSumWarning(UserWarning):
    """A sum received zero posterior mass; its weights are left unchanged."""


# --- MPE ------------------------------------------------------------------


class NotSelective(SpnError):
    pass


class EmptyEvidenceSet(SpnError):
    pass


# --- oracle ---------------------------------------------------------------


class TooLarge(SpnError):
    pass


class ContinuousVariablePresent(SpnError):
    pass


# --- file formats ---------------------------------------------------------


class ParseError(SpnError):
    pass
