"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2,
numerical failures exit 3, and I/O or schema problems exit 4.
"""

from __future__ import annotations


class NcolabError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(NcolabError):
    """Invalid configuration value, preset name, or flag combination."""


class ShapeError(NcolabError):
    """Array dimensions do not match the declared structure."""


class NonFiniteError(NcolabError):
    """A NaN or Inf appeared during a forward computation.

    Carries the name of the first offending primitive in ``op``.
    """

    def __init__(self, op: str, message: str | None = None):
        self.op = op
        super().__init__(message or f"non-finite value produced by op '{op}'")


class DivergenceError(NcolabError):
    """State rollout blew up. Carries the first bad step index in ``step``."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"rollout diverged at step {step}")


class SingularityError(NcolabError):
    """A matrix that must be invertible is numerically singular."""


class DomainError(NcolabError):
    """Inputs violate a mathematical precondition (e.g. non-descending endpoints)."""


class NumericalError(NcolabError):
    """A numerical routine failed to produce a usable result."""


class InfeasibleError(NumericalError):
    """A solver could not reach feasibility within its iteration budget."""


class SchemaError(NcolabError):
    """Persisted file does not match the expected schema."""


class DataFormatError(SchemaError):
    """A data file is corrupt. Carries the 1-based line number in ``line``."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")
