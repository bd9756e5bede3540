"""Exceptions raised by the simulator.

Every error derives from ``SimulationError`` and from the closest builtin, so
``except ValueError`` keeps working for callers that do not know this module.
"""

from typing import Optional


class SimulationError(Exception):
    """Base class for every error raised by the simulator."""


class ContractViolation(SimulationError, TypeError):
    """An operation received inputs of the wrong kind or shape."""


class CapacityError(SimulationError, ValueError):
    """More basis modes were requested than the grid can represent."""

    def __init__(self, requested: int, maximum: int) -> None:
        super().__init__(
            f"requested {requested} basis modes but the grid holds at most {maximum}"
        )
        self.requested = requested
        self.maximum = maximum


class MollifierResolutionError(SimulationError, ValueError):
    """The mollifier support is narrower than one grid cell."""


class DensityValidationError(SimulationError, ValueError):
    """A density field violates non-negativity or finiteness."""


class DomainError(SimulationError, ValueError):
    """A parameter lies outside the domain of a norm or operator."""


class CFLViolation(SimulationError, ValueError):
    """The transport step exceeds the configured Courant number."""

    def __init__(self, ratio: float, limit: float) -> None:
        super().__init__(f"CFL number {ratio:.6g} exceeds the limit {limit:.6g}")
        self.ratio = ratio
        self.limit = limit


class NumericalFailure(SimulationError, ArithmeticError):
    """The solver produced non-finite values."""

    def __init__(self, message: str, time: Optional[float] = None) -> None:
        if time is not None:
            message = f"{message} (t = {time:.6g})"
        super().__init__(message)
        self.time = time


class DegeneracyError(NumericalFailure):
    """The mass matrix lost positive definiteness."""


class UnsupportedConfiguration(SimulationError, ValueError):
    """A diagnostic was requested for parameters it does not cover."""


class EstimateError(SimulationError, ValueError):
    """An estimate ledger cannot be aggregated."""


class StabilityError(SimulationError, ValueError):
    """Two runs cannot be compared."""


class UniquenessViolation(SimulationError):
    """Two runs from identical data separated."""


class ConfigError(SimulationError, ValueError):
    """A configuration file is malformed or inconsistent."""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None) -> None:
        location = []
        if key is not None:
            location.append(f"key '{key}'")
        if line is not None:
            location.append(f"line {line}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.key = key
        self.line = line
