"""Typed errors shared by the capflow modules.

Each class marks one failure family so callers (and the CLI) can map them
to exit codes and messages without string matching.
"""

__all__ = [
    "CapflowError",
    "DomainError",
    "StructuralError",
    "LevelError",
    "VariantError",
    "RegimeError",
    "StabilityError",
    "GridMismatchError",
    "ConfigError",
]


class CapflowError(ValueError):
    """Base class for all capflow errors."""


class DomainError(CapflowError):
    """A saturation or coordinate argument is outside its admissible range."""


class StructuralError(CapflowError):
    """A flux family violates the structural shape hypotheses."""


class LevelError(CapflowError):
    """A flux level is outside the attainable range of the medium."""


class VariantError(CapflowError):
    """A steady-state variant was requested where it does not exist."""


class RegimeError(CapflowError):
    """A capillarity parameter is outside the disjoint-graph regime."""


class StabilityError(CapflowError):
    """A requested time step violates the stability bound."""


class GridMismatchError(CapflowError):
    """Two discrete objects live on incompatible grids."""


class ConfigError(CapflowError):
    """An experiment configuration is invalid; message lists every problem."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__(
            "invalid configuration:\n" + "\n".join("  - " + p for p in self.problems)
        )
