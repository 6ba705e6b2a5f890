"""Channel model, measurement records and exact data synthesis.

Without an eavesdropper the n-photon yield is

    q_n = A * (1 - (1 - eta)^n) + B

and a phase-randomized pulse of intensity mu produces the detection rate
Q(mu) = exp(-mu) * sum_n mu^n / n! * y_n. Error products b_n = y_n * e_n
follow the same form with A = e_det and B = p_dark / 2.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, List, Optional, Sequence, Tuple

import mpmath

from .errors import (
    DegenerateIntensities,
    DomainError,
    NegativeQPlus,
    NonIncreasingIntensities,
    ParameterDomainError,
    ValidationError,
)
from .symfunc import DEFAULT_PRECISION, PrecisionConfig, to_mpf

logger = logging.getLogger(__name__)

ETA_MAX = "0.1"
E_MAX = "0.5"
SERIES_REL_TOL = "1e-30"


def _check_prec():
    # Validation comparisons only; never used for results.
    return mpmath.workprec(128)


# ── Types ──

@dataclass(frozen=True)
class ChannelParams:
    """Model parameters A, B, eta.

    ``strict`` rejects values outside 0 <= A <= 1, 0 <= B <= eta <= 1/10.
    With ``strict=False`` they are accepted and ``domain_ok`` reports False.
    """

    A: Any
    B: Any
    eta: Any
    strict: bool = True

    def __post_init__(self) -> None:
        problems = self.domain_problems()
        if problems and self.strict:
            raise ParameterDomainError("; ".join(problems))
        if problems:
            logger.warning(f"channel parameters outside the model domain: {'; '.join(problems)}")

    def domain_problems(self) -> List[str]:
        out: List[str] = []
        with _check_prec():
            a, b, eta = to_mpf(self.A), to_mpf(self.B), to_mpf(self.eta)
            if not 0 <= a <= 1:
                out.append(f"A={self.A} not in [0, 1]")
            if b < 0:
                out.append(f"B={self.B} is negative")
            if b > eta:
                out.append(f"B={self.B} exceeds eta={self.eta}")
            if eta > to_mpf(ETA_MAX):
                out.append(f"eta={self.eta} exceeds {ETA_MAX}")
            if eta < 0:
                out.append(f"eta={self.eta} is negative")
        return out

    @property
    def domain_ok(self) -> bool:
        return not self.domain_problems()

    @classmethod
    def error_model(cls, e_det: Any, p_dark: Any, eta: Any, strict: bool = True) -> "ChannelParams":
        """Parameters of the error-product model: A = e_det, B = p_dark / 2."""
        with _check_prec():
            if not 0 <= to_mpf(e_det) <= to_mpf(E_MAX):
                raise ParameterDomainError(f"e_det={e_det} not in [0, 0.5]")
        with DEFAULT_PRECISION.workprec():
            half_dark = to_mpf(p_dark) / 2
        return cls(A=e_det, B=half_dark, eta=eta, strict=strict)

    def to_dict(self) -> dict:
        return {"A": _plain(self.A), "B": _plain(self.B), "eta": _plain(self.eta)}


@dataclass(frozen=True)
class IntensitySet:
    """Strictly increasing positive intensities plus the vacuum yield y0."""

    mu: Tuple[Any, ...]
    y0: Any = 0

    def __post_init__(self) -> None:
        mu = tuple(self.mu)
        object.__setattr__(self, "mu", mu)
        if not mu:
            raise ValidationError("at least one intensity is required")
        with _check_prec():
            xs = [to_mpf(x) for x in mu]
            for i, x in enumerate(xs):
                if x <= 0:
                    raise ValidationError(f"intensity mu_{i + 1}={mu[i]} must be positive")
            for i in range(len(xs) - 1):
                if xs[i + 1] == xs[i]:
                    raise DegenerateIntensities(
                        f"duplicate intensity {mu[i]} at positions {i + 1} and {i + 2}", gap=0
                    )
                if xs[i + 1] < xs[i]:
                    raise NonIncreasingIntensities(
                        f"intensities must be strictly increasing: mu_{i + 1}={mu[i]} > mu_{i + 2}={mu[i + 1]}"
                    )
            if not 0 <= to_mpf(self.y0) <= 1:
                raise ValidationError(f"y0={self.y0} not in [0, 1]")

    @property
    def M(self) -> int:
        return len(self.mu)

    @property
    def all_le_one(self) -> bool:
        with _check_prec():
            return to_mpf(self.mu[-1]) <= 1

    def values(self) -> List[mpmath.mpf]:
        """Intensities as mpf at the current working precision."""
        return [to_mpf(x) for x in self.mu]


@dataclass(frozen=True)
class MeasurementRecord:
    """Detection rates Q_i and optional error rates E_i per intensity."""

    intensities: IntensitySet
    Q: Tuple[Any, ...]
    E: Optional[Tuple[Any, ...]] = None
    model: Optional[ChannelParams] = None
    notes: Tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        q = tuple(self.Q)
        object.__setattr__(self, "Q", q)
        if len(q) != self.intensities.M:
            raise ValidationError(f"{len(q)} detection rates for {self.intensities.M} intensities")
        if self.E is not None:
            e = tuple(self.E)
            object.__setattr__(self, "E", e)
            if len(e) != self.intensities.M:
                raise ValidationError(f"{len(e)} error rates for {self.intensities.M} intensities")
        object.__setattr__(self, "notes", tuple(self.notes))
        with _check_prec():
            for i, qi in enumerate(q):
                if not 0 <= to_mpf(qi) <= 1:
                    raise ValidationError(f"Q_{i + 1}={qi} not in [0, 1]")
            for i, ei in enumerate(self.E or ()):
                if not 0 <= to_mpf(ei) <= to_mpf(E_MAX):
                    raise ValidationError(f"E_{i + 1}={ei} not in [0, 0.5]")

    @property
    def has_errors(self) -> bool:
        return self.E is not None


def _plain(value: Any) -> Any:
    if isinstance(value, mpmath.mpf):
        return mpmath.nstr(value, 30)
    return value


# ── Model evaluation ──

def yield_q(n: int, p: ChannelParams, precision: PrecisionConfig = DEFAULT_PRECISION) -> mpmath.mpf:
    """q_n = A (1 - (1 - eta)^n) + B. n = 0 gives the vacuum yield B."""
    if n < 0:
        raise DomainError(f"photon number must be >= 0, got {n}")
    with precision.workprec():
        a, b, eta = to_mpf(p.A), to_mpf(p.B), to_mpf(p.eta)
        return a * (1 - (1 - eta) ** n) + b


def synth_qplus(mu: Any, p: ChannelParams, precision: PrecisionConfig = DEFAULT_PRECISION) -> mpmath.mpf:
    """exp(-mu) * sum_{n>=1} mu^n/n! q_n = A(1 - exp(-eta mu)) + B(1 - exp(-mu))."""
    with precision.workprec():
        x = to_mpf(mu)
        if x <= 0:
            raise DomainError(f"intensity must be positive, got {mu}")
        a, b, eta = to_mpf(p.A), to_mpf(p.B), to_mpf(p.eta)
        return -a * mpmath.expm1(-eta * x) - b * mpmath.expm1(-x)


def qplus_series(
    mu: Any,
    p: ChannelParams,
    precision: PrecisionConfig = DEFAULT_PRECISION,
    rel_tol: Any = SERIES_REL_TOL,
) -> mpmath.mpf:
    """Direct Poisson series for synth_qplus; stops once terms drop below rel_tol."""
    with precision.workprec():
        x = to_mpf(mu)
        tol = to_mpf(rel_tol)
        scale = abs(to_mpf(p.A)) + abs(to_mpf(p.B)) + 1
        total = mpmath.mpf(0)
        weight = mpmath.mpf(1)
        n = 0
        while True:
            n += 1
            weight = weight * x / n
            total += weight * yield_q(n, p, precision)
            if n > x and weight * scale <= tol * abs(total):
                break
            if weight < mpmath.eps:
                break
        return mpmath.exp(-x) * total


def synth_error_rhs(
    mu: Any,
    e_det: Any,
    p_dark: Any,
    eta: Any,
    precision: PrecisionConfig = DEFAULT_PRECISION,
) -> mpmath.mpf:
    """Q(mu) E(mu) = e_det (1 - exp(-eta mu)) + p_dark / 2."""
    with precision.workprec():
        e = to_mpf(e_det)
        if not 0 <= e <= to_mpf(E_MAX):
            raise DomainError(f"e_det={e_det} not in [0, 0.5]")
        return -e * mpmath.expm1(-to_mpf(eta) * to_mpf(mu)) + to_mpf(p_dark) / 2


def model_yields(
    p: ChannelParams,
    N: int,
    precision: PrecisionConfig = DEFAULT_PRECISION,
) -> Tuple[List[mpmath.mpf], List[str]]:
    """[q_1, ..., q_N] clamped to 1, plus a note for each clamped entry."""
    notes: List[str] = []
    out: List[mpmath.mpf] = []
    with precision.workprec():
        for n in range(1, N + 1):
            q = yield_q(n, p, precision)
            if q > 1:
                notes.append(f"q_{n} clamped to 1 (model value {mpmath.nstr(q, 10)})")
                q = mpmath.mpf(1)
            out.append(q)
    if notes:
        logger.warning(f"{len(notes)} model yields exceed 1 and were clamped")
    return out, notes


def push_forward(
    y: Sequence[Any],
    intensities: IntensitySet,
    b: Optional[Sequence[Any]] = None,
    precision: PrecisionConfig = DEFAULT_PRECISION,
    model: Optional[ChannelParams] = None,
    notes: Sequence[str] = (),
) -> MeasurementRecord:
    """Detection data produced by the finite-support yields y_1..y_N.

    Q_i = exp(-mu_i) (y0 + sum_n mu_i^n/n! y_n). With error products b the
    error rates follow from Q_i E_i = exp(-mu_i) (y0/2 + sum_n mu_i^n/n! b_n).
    """
    with precision.workprec():
        y0 = to_mpf(intensities.y0)
        ys = [to_mpf(v) for v in y]
        bs = [to_mpf(v) for v in b] if b is not None else None
        q_rates: List[mpmath.mpf] = []
        e_rates: List[mpmath.mpf] = []
        for x in intensities.values():
            damp = mpmath.exp(-x)
            weight = mpmath.mpf(1)
            det_sum = y0
            err_sum = y0 / 2
            for n in range(1, max(len(ys), len(bs or ())) + 1):
                weight = weight * x / n
                if n <= len(ys):
                    det_sum += weight * ys[n - 1]
                if bs is not None and n <= len(bs):
                    err_sum += weight * bs[n - 1]
            q = damp * det_sum
            q_rates.append(q)
            if bs is not None:
                e_rates.append(damp * err_sum / q if q > 0 else mpmath.mpf(0))
    return MeasurementRecord(
        intensities=intensities,
        Q=tuple(q_rates),
        E=tuple(e_rates) if bs is not None else None,
        model=model,
        notes=tuple(notes),
    )


def synthesize_record(
    p: ChannelParams,
    mu: Sequence[Any],
    y0: Any = None,
    e_det: Any = None,
    p_dark: Any = None,
    precision: PrecisionConfig = DEFAULT_PRECISION,
) -> MeasurementRecord:
    """Exact model data for intensities mu.

    y0 defaults to the model vacuum yield B. Error rates are produced when
    e_det is given; p_dark defaults to B. Yields q_n above 1 are clamped
    to 1 and the record carries a note saying where clamping starts.
    """
    notes: List[str] = []
    with precision.workprec():
        vac = to_mpf(p.B) if y0 is None else to_mpf(y0)
        intensities = IntensitySet(tuple(mu), vac)
        start = clamp_start(p, intensities.mu[-1], precision)
        if start is not None:
            notes.append(
                f"q_n clamped to 1 for n >= {start} (model value q_{start} = "
                f"{mpmath.nstr(yield_q(start, p, precision), 10)})"
            )
            logger.warning(notes[-1])
        q_rates = []
        e_rates = []
        dark = to_mpf(p.B) if p_dark is None else to_mpf(p_dark)
        for x in intensities.values():
            q = mpmath.exp(-x) * vac + synth_qplus(x, p, precision)
            if start is not None:
                q -= mpmath.exp(-x) * _clamp_excess(x, p, start, precision)
            q_rates.append(q)
            if e_det is not None:
                e_rates.append(synth_error_rhs(x, e_det, dark, p.eta, precision) / q)
    return MeasurementRecord(
        intensities=intensities,
        Q=tuple(q_rates),
        E=tuple(e_rates) if e_det is not None else None,
        model=p,
        notes=tuple(notes),
    )


def clamp_start(
    p: ChannelParams,
    mu_max: Any,
    precision: PrecisionConfig = DEFAULT_PRECISION,
) -> Optional[int]:
    """First n with q_n > 1 whose Poisson weight at mu_max is still visible."""
    with precision.workprec():
        if to_mpf(p.A) + to_mpf(p.B) <= 1:
            return None
        x = to_mpf(mu_max)
        weight = mpmath.mpf(1)
        n = 0
        while True:
            n += 1
            weight = weight * x / n
            if yield_q(n, p, precision) > 1:
                return n
            if n > x and weight < mpmath.eps:
                return None


def _clamp_excess(x: mpmath.mpf, p: ChannelParams, start: int, precision: PrecisionConfig) -> mpmath.mpf:
    """sum_{n >= start} (q_n - 1) x^n / n!"""
    total = mpmath.mpf(0)
    weight = x ** start / mpmath.factorial(start)
    n = start
    while True:
        term = (yield_q(n, p, precision) - 1) * weight
        total += term
        if n > x and term <= mpmath.eps * total:
            return total
        n += 1
        weight = weight * x / n


def to_constraint_rhs(
    record: MeasurementRecord,
    errors: bool = False,
    precision: PrecisionConfig = DEFAULT_PRECISION,
) -> List[mpmath.mpf]:
    """exp(mu_i) Q_+(mu_i) per intensity, or the error-product analogue.

    Yields:  exp(mu_i) (Q_i - exp(-mu_i) y0)
    Errors:  exp(mu_i) (Q_i E_i - exp(-mu_i) y0 / 2)
    """
    if errors and record.E is None:
        raise ValidationError("error analysis requested but the record has no error rates")
    with precision.workprec():
        y0 = to_mpf(record.intensities.y0)
        vac = y0 / 2 if errors else y0
        slack = mpmath.mpf(2) ** (8 - precision.significand_bits)
        out: List[mpmath.mpf] = []
        for i, x in enumerate(record.intensities.values()):
            observed = to_mpf(record.Q[i])
            if errors:
                observed *= to_mpf(record.E[i])
            vacuum_part = mpmath.exp(-x) * vac
            qplus = observed - vacuum_part
            if qplus < 0:
                # Rounding residue from exactly vacuum-dominated data is zeroed.
                if -qplus > slack * max(observed, vacuum_part):
                    what = "Q_i E_i" if errors else "Q_i"
                    raise NegativeQPlus(
                        f"{what} at mu_{i + 1}={record.intensities.mu[i]} is below the vacuum contribution",
                        index=i + 1,
                    )
                qplus = mpmath.mpf(0)
            out.append(mpmath.exp(x) * qplus)
        return out
