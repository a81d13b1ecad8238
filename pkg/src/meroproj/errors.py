"""Exception hierarchy.

Every error carries a machine-readable ``code`` and a process exit code so the
command line front end can map failures without inspecting messages.
"""

from __future__ import annotations


class MeroprojError(Exception):
    """Base class. ``exit_code`` 2 means invalid input, 3 numerical failure."""

    exit_code = 2

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_json(self) -> dict:
        return {"error": {"code": self.code, "message": str(self)}}


class ValidationError(MeroprojError):
    exit_code = 2


class NumericalFailure(MeroprojError):
    exit_code = 3


# algebra
class DivisionByZeroFunction(ValidationError):
    pass


class TruncationTooSmall(ValidationError):
    pass


class SingularLeadingTerm(NumericalFailure):
    pass


class DegreeOverflow(NumericalFailure):
    pass


# projective
class ConstantInput(ValidationError):
    pass


class ZeroDifferential(ValidationError):
    pass


class NotAPole(ValidationError):
    pass


# riccati
class DegenerateGauge(ValidationError):
    pass


class SectionInvariant(ValidationError):
    pass


class AlreadyTransverse(ValidationError):
    pass


class NotRegularSingular(ValidationError):
    pass


# formal
class ZeroLeadingTerm(ValidationError):
    pass


class ResonanceOverflow(NumericalFailure):
    pass


class WrongClass(ValidationError):
    pass


class RamifiedConventionRequired(ValidationError):
    pass


# monodromy
class PoleTooClose(ValidationError):
    pass


class ToleranceNotMet(NumericalFailure):
    pass


class MatchingFailed(NumericalFailure):
    pass


class NotIrregular(ValidationError):
    pass


# lab
class HypothesisViolated(ValidationError):
    pass


class ResidueUnreachable(NumericalFailure):
    pass
