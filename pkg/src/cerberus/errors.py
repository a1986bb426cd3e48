"""Exception hierarchy shared across the engine."""


class CerberusError(Exception):
    """Base class for all engine errors."""


# --- rulebase ---------------------------------------------------------------

class EmptyPerturbedSet(CerberusError):
    """Candidate pool requested but the perturbed label list is empty."""


class DuplicateRule(CerberusError):
    """Rule text already present (after normalization)."""


class EmptyRuleText(CerberusError):
    """Rule text is empty after trimming."""


class SchemaVersionMismatch(CerberusError):
    """Persisted file carries an unknown schema tag."""


# --- induction / input ------------------------------------------------------

class EmptyInput(CerberusError):
    """Operation needs at least one input element."""


class UnparseableResponse(CerberusError):
    """Backend response yielded zero usable rules."""


# --- motion -----------------------------------------------------------------

class DimensionMismatch(CerberusError):
    """Frames or vectors have different shapes."""


class BadThresholds(CerberusError):
    """epsilon_motion must be strictly below alpha_prompt."""


# --- scoring ----------------------------------------------------------------

class ZeroVector(CerberusError):
    """Cannot normalize a zero-norm embedding."""


class EmptyPool(CerberusError):
    """Health score needs a non-empty candidate pool."""


class InsufficientCalibrationData(CerberusError):
    """Threshold calibration needs at least 20 scores."""


# --- backends ---------------------------------------------------------------

class BackendUnavailable(CerberusError):
    """Transport-level failure talking to a model service."""


class MalformedResponse(CerberusError):
    """Backend answered but the payload violates the contract."""


class EmptyCaption(CerberusError):
    """Captioner returned an empty string."""


# --- cascade / eval ---------------------------------------------------------

class BadParams(CerberusError):
    """Throughput model parameters out of range."""


class SingleClass(CerberusError):
    """AUC needs both normal and abnormal labels present."""


class LengthMismatch(CerberusError):
    """Parallel label arrays differ in length."""


class RatioNotReducible(CerberusError):
    """Target anomaly ratio not below the current ratio."""


# --- evolution / service ----------------------------------------------------

class UnknownItem(CerberusError):
    """Feedback item id not found."""


class AlreadyDecided(CerberusError):
    """Feedback item already has a decision."""


class UnknownScene(CerberusError):
    """No verdicts recorded for the requested scene."""


class StoreCorrupt(CerberusError):
    """A persisted store failed to load at service startup."""
