"""Secure key rate from detection data and single-photon bounds."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Optional

import mpmath

from .bounds import BoundsReport
from .errors import DegenerateYield, DomainError, ValidationError
from .symfunc import DEFAULT_PRECISION, PrecisionConfig, to_mpf

logger = logging.getLogger(__name__)

DEFAULT_F_EC = 1.22
E1_CEILING = "0.5"


def h2(e: Any, precision: PrecisionConfig = DEFAULT_PRECISION) -> mpmath.mpf:
    """Binary entropy in bits, with 0 log 0 = 0."""
    with precision.workprec():
        x = to_mpf(e)
        if x < 0 or x > 1:
            raise DomainError(f"h2 needs 0 <= e <= 1, got {e}")
        if x == 0 or x == 1:
            return mpmath.mpf(0)
        return -x * mpmath.log(x, 2) - (1 - x) * mpmath.log(1 - x, 2)


@dataclass(frozen=True)
class KeyRateInput:
    Q: Any
    E: Any
    Q0: Any
    Q1: Any
    e1: Any
    f: Any = DEFAULT_F_EC

    def __post_init__(self) -> None:
        with mpmath.workprec(128):
            for name in ("Q", "E", "Q0", "Q1"):
                if not 0 <= to_mpf(getattr(self, name)) <= 1:
                    raise ValidationError(f"{name}={getattr(self, name)} not in [0, 1]")
            if not 0 <= to_mpf(self.e1) <= to_mpf(E1_CEILING):
                raise ValidationError(f"e1={self.e1} not in [0, 0.5]")
            if to_mpf(self.f) < 1:
                raise ValidationError(f"error-correction inefficiency f={self.f} must be >= 1")


def key_rate(inp: KeyRateInput, precision: PrecisionConfig = DEFAULT_PRECISION) -> mpmath.mpf:
    """R = -Q f H2(E) + Q0 + Q1 (1 - H2(e1)); negative means no secure key."""
    with precision.workprec():
        ec = to_mpf(inp.Q) * to_mpf(inp.f) * h2(inp.E, precision)
        return -ec + to_mpf(inp.Q0) + to_mpf(inp.Q1) * (1 - h2(inp.e1, precision))


def key_rate_printed(inp: KeyRateInput, precision: PrecisionConfig = DEFAULT_PRECISION) -> mpmath.mpf:
    """Same terms with the error-correction cost added instead of subtracted."""
    with precision.workprec():
        ec = to_mpf(inp.Q) * to_mpf(inp.f) * h2(inp.E, precision)
        return ec + to_mpf(inp.Q0) + to_mpf(inp.Q1) * (1 - h2(inp.e1, precision))


def e1_upper(b1_max: Any, y1_min: Any, precision: PrecisionConfig = DEFAULT_PRECISION) -> mpmath.mpf:
    """min(0.5, b1_max / y1_min)."""
    with precision.workprec():
        y = to_mpf(y1_min)
        if y <= 0:
            raise DegenerateYield(f"single-photon yield lower bound must be positive, got {mpmath.nstr(y, 10)}")
        return min(to_mpf(E1_CEILING), max(to_mpf(b1_max), mpmath.mpf(0)) / y)


@dataclass(frozen=True)
class KeyRateResult:
    signal_index: int
    inputs: KeyRateInput
    rate: mpmath.mpf
    rate_printed: mpmath.mpf


def key_rate_from_bounds(
    yields: BoundsReport,
    errors: BoundsReport,
    signal_index: Optional[int] = None,
    f: Any = DEFAULT_F_EC,
    precision: PrecisionConfig = DEFAULT_PRECISION,
) -> KeyRateResult:
    """Compose Q0, Q1 and e1 from a yield report and an error-product report.

    The signal defaults to the largest intensity. Q1 = exp(-mu) mu y1_min
    uses the lower end of the y_1 interval and e1 the upper end of b_1.
    """
    record = yields.record
    if record.E is None:
        raise ValidationError("key rate needs error rates E(mu) in the record")
    idx = record.intensities.M - 1 if signal_index is None else signal_index
    if not 0 <= idx < record.intensities.M:
        raise DomainError(f"signal index {idx} outside 0..{record.intensities.M - 1}")
    with precision.workprec():
        mu = to_mpf(record.intensities.mu[idx])
        damp = mpmath.exp(-mu)
        y1_min = yields.interval(1).lo
        b1_max = errors.interval(1).hi
        e1 = e1_upper(b1_max, y1_min, precision)
        inputs = KeyRateInput(
            Q=to_mpf(record.Q[idx]),
            E=to_mpf(record.E[idx]),
            Q0=damp * to_mpf(record.intensities.y0),
            Q1=damp * mu * y1_min,
            e1=e1,
            f=f,
        )
        rate = key_rate(inputs, precision)
        printed = key_rate_printed(inputs, precision)
    if rate < 0:
        logger.warning(f"key rate {mpmath.nstr(rate, 6)} is negative: no secure key at this intensity")
    logger.debug(f"key rate {mpmath.nstr(rate, 10)}; printed-form value {mpmath.nstr(printed, 10)}")
    return KeyRateResult(signal_index=idx, inputs=inputs, rate=rate, rate_printed=printed)
