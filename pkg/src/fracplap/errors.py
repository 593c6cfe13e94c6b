"""Exception types and the refusal record shared across the package."""

from __future__ import annotations

from dataclasses import dataclass, field


class FracplapError(Exception):
    """Base class for package errors."""


class ConfigurationError(FracplapError, ValueError):
    """A parameter lies outside its admissible window."""


class UsageError(FracplapError, ValueError):
    """Inputs that do not fit together (grid mismatch, wrong certificate kind)."""


class NumericalDomainError(FracplapError, ValueError):
    """A quantity is undefined or non-finite for the given inputs."""


class PreconditionError(FracplapError, ValueError):
    """A documented precondition of an operation does not hold."""


@dataclass(frozen=True)
class Refusal:
    """Negative answer carrying the reason it was given.

    ``binding`` names the constraint that could not be met; ``details``
    holds diagnostics such as the supremal admissible exponent.
    """

    reason: str
    binding: str = ""
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return False

    def to_dict(self) -> dict:
        return {"refused": True, "reason": self.reason, "binding": self.binding,
                **self.details}
