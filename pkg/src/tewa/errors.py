"""Exception hierarchy shared by every module."""


class TewaError(Exception):
    """Base class for all package errors."""


class ValidationError(TewaError, ValueError):
    """Input failed validation. ``path`` locates the offending field."""

    def __init__(self, path, reason):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}" if path else reason)


class ParseError(TewaError, ValueError):
    pass


# fuzzy
class UnknownLabel(TewaError, KeyError):
    pass


class NoRuleFired(TewaError, ArithmeticError):
    pass


class ConflictingAnchors(TewaError, ValueError):
    pass


# threat
class ZeroVector(TewaError, ValueError):
    pass


class UnknownPlatform(TewaError, KeyError):
    pass


class EmptyTrackList(TewaError, ValueError):
    pass


# wta
class DimensionMismatch(TewaError, ValueError):
    pass


class InstanceTooLarge(TewaError, RuntimeError):
    pass


# agents
class EmptyCandidates(TewaError, ValueError):
    pass


class ZeroBaseline(TewaError, ZeroDivisionError):
    pass


class UnknownEvent(TewaError, ValueError):
    pass


# eval
class MalformedTrace(TewaError, ValueError):
    pass


class InvalidParameters(TewaError, ValueError):
    pass


class UnsupportedAlpha(TewaError, ValueError):
    pass


class UnsupportedSample(TewaError, ValueError):
    pass


class NoApplicableFamily(TewaError, ValueError):
    pass


# sim
class UnknownExperiment(TewaError, ValueError):
    pass
