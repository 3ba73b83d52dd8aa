"""Exception hierarchy shared by all simmark modules."""


class SimmarkError(Exception):
    """Base class for all simmark errors."""


class ValidationError(SimmarkError):
    """Bad input or configuration supplied by the caller (CLI exit code 1)."""


class RuntimeFailure(SimmarkError):
    """Remote or environmental failure at run time (CLI exit code 2)."""


# --- segmentation ---

class EmptyText(ValidationError):
    pass


class TooShort(ValidationError):
    pass


# --- embedding ---

class EmptyInput(ValidationError):
    pass


class RemoteUnavailable(RuntimeFailure):
    pass


class DimensionMismatch(ValidationError):
    pass


# --- projection ---

class InsufficientData(ValidationError):
    pass


class ProvenanceMismatch(ValidationError):
    pass


# --- similarity ---

class ZeroVector(ValidationError):
    pass


# --- detection ---

class InvalidP0(ValidationError):
    pass


# --- calibration ---

class InsufficientSamples(ValidationError):
    pass


class NoOverlap(ValidationError):
    pass


class TargetUnreachable(ValidationError):
    pass


# --- generation ---

class GeneratorUnavailable(RuntimeFailure):
    pass


class EmbedderUnavailable(RuntimeFailure):
    pass


class CandidateEmpty(RuntimeFailure):
    pass


class InvalidRequest(ValidationError):
    pass


# --- attacks ---

class InvalidProbability(ValidationError):
    pass


class AllDropped(ValidationError):
    pass


class ParaphraserUnavailable(RuntimeFailure):
    pass


class EmptyParaphrase(RuntimeFailure):
    pass


# --- evaluation ---

class MissingClass(ValidationError):
    pass


# --- config ---

class ConfigError(ValidationError):
    pass
