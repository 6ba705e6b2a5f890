"""Exception hierarchy shared by every decoy_bounds module.

Each error carries the process exit code the CLI should use and can render
itself as a structured JSON-friendly dict.
"""

from typing import Any, Dict, Optional


class DecoyBoundsError(RuntimeError):
    """Base exception for decoy_bounds errors."""

    exit_code = 1

    def __init__(self, message: str, **fields: Any):
        self.fields: Dict[str, Any] = {k: v for k, v in fields.items() if v is not None}
        super().__init__(message)

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"type": type(self).__name__, "message": str(self)}
        out.update({k: str(v) if not isinstance(v, (int, float, str, bool)) else v
                    for k, v in self.fields.items()})
        return out


# ── Validation (exit 2) ──

class ValidationError(DecoyBoundsError):
    """Input violates a documented invariant."""

    exit_code = 2


class DegenerateIntensities(ValidationError):
    """Two intensities are closer than the configured relative gap."""

    def __init__(self, message: str, gap: Any = None, threshold: Any = None):
        super().__init__(message, gap=gap, threshold=threshold)


class NonIncreasingIntensities(ValidationError):
    """Intensities are not strictly increasing."""


class PartitionTooLong(ValidationError):
    """Partition has more rows than there are variables."""


class ParameterDomainError(ValidationError):
    """Channel parameters fall outside 0 <= A <= 1, 0 <= B <= eta <= 1/10."""


class NegativeQPlus(ValidationError):
    """Q(mu) is below the vacuum contribution exp(-mu) * y0."""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message, index=index)


class DomainError(ValidationError):
    """Argument outside the mathematical domain of a function."""


class DegenerateYield(ValidationError):
    """Single-photon yield lower bound is not positive."""


class EnumerationTooLarge(ValidationError):
    """Enumeration requested beyond its configured cap."""


class SchemaError(ValidationError):
    """Input file does not match the measurement schema."""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.line = line
        self.field = field
        super().__init__(message, line=line, field=field)


# ── Infeasibility (exit 3) ──

class InfeasibleData(DecoyBoundsError):
    """Data cannot be produced by any yield vector in [0, 1]."""

    exit_code = 3


# ── Search limits (exit 4) ──

class CapExceeded(DecoyBoundsError):
    """(L0, a0) search ran past its cap."""

    exit_code = 4

    def __init__(self, message: str, cap: Optional[int] = None):
        self.cap = cap
        super().__init__(message, cap=cap)


# ── Verification (exit 5) ──

class OracleMismatch(DecoyBoundsError):
    """Brute-force LP disagrees with the closed-form bounds."""

    exit_code = 5
