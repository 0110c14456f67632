"""Exception hierarchy shared across the package."""

from __future__ import annotations


class XFrerError(Exception):
    """Base class for every error raised by this package."""


# frer core
class UnknownStream(XFrerError, LookupError):
    pass


class AlreadyTagged(XFrerError, ValueError):
    pass


class SeqOutOfRange(XFrerError, ValueError):
    pass


class MissingRTag(XFrerError, ValueError):
    pass


class EmptyPathSet(XFrerError, ValueError):
    pass


class DuplicatePathLabel(XFrerError, ValueError):
    pass


class MemberMismatch(XFrerError, ValueError):
    pass


class WireFormatError(XFrerError, ValueError):
    pass


# 5G model / enhancements
class StructuralMismatch(XFrerError, ValueError):
    pass


class InvalidTheta(XFrerError, ValueError):
    pass


# simulation / oracle
class ConfigInvalid(XFrerError, ValueError):
    pass


class HopCountMismatch(XFrerError, ValueError):
    pass


class TooManyElements(XFrerError, ValueError):
    pass


class HopOutOfRange(XFrerError, IndexError):
    pass


# scenarios
class ParseError(XFrerError, ValueError):
    pass


class UnknownBuiltin(XFrerError, KeyError):
    def __str__(self) -> str:  # KeyError would repr() the message
        return str(self.args[0]) if self.args else ""


class ValidationError(XFrerError, ValueError):
    """Raised with every violated invariant collected in ``problems``."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
