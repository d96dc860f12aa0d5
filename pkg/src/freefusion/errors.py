"""Exception types shared across the package.

Every error carries a short machine-readable reason so CLI consumers and
certificate checkers can report the blocking condition without parsing prose.
"""

from __future__ import annotations


class FreefusionError(Exception):
    """Base class for all package errors."""


class UnknownPoint(FreefusionError):
    pass


class InvalidEmbedding(FreefusionError):
    pass


class NotSublanguage(FreefusionError):
    pass


class SignatureMismatch(FreefusionError):
    pass


class SignatureOverlap(FreefusionError):
    pass


class NotInClass(FreefusionError):
    pass


class IdentificationNotIso(FreefusionError):
    pass


class HasExpansionComponent(FreefusionError):
    pass


class NoCompletion(FreefusionError):
    pass


class Unsupported(FreefusionError):
    pass


class AlgebraicType(FreefusionError):
    pass


class PolicyUnsatisfiable(FreefusionError):
    pass


class ModeMismatch(FreefusionError):
    pass


class NotIncreasing(FreefusionError):
    pass


class NotUnboundedlyIncreasing(FreefusionError):
    pass


class NoWitnessFound(FreefusionError):
    """Bounded witness search exhausted; never a negative verdict."""


class FixedPoint(FreefusionError):
    pass


class NotMetricWorld(FreefusionError):
    pass


class PreconditionFailed(FreefusionError):
    pass


class SolverExhausted(FreefusionError):
    """A solver gave up on a subgoal; carries the failing subgoal name."""

    def __init__(self, subgoal: str, detail: str = ""):
        self.subgoal = subgoal
        self.detail = detail
        super().__init__(f"solver exhausted at {subgoal}" + (f": {detail}" if detail else ""))


class NotSupported(FreefusionError):
    pass


class TypeMismatch(FreefusionError):
    pass
