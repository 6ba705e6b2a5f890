"""Vandermonde determinants and Schur polynomials at configurable precision.

Schur polynomials are available three ways so they can cross-check each other:

  - the bialternant (ratio of a generalized alternant to the Vandermonde
    determinant), valid for any partition;
  - a sum over semistandard tableaux, for small shapes only;
  - a fast path for hook shapes (a, 1, ..., 1) built from complete and
    elementary symmetric polynomials. Hooks are the only shapes the bounds
    engine needs.

All floating-point work happens in mpmath at ``PrecisionConfig.significand_bits``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterator, List, Sequence, Tuple

import mpmath

from .errors import (
    DegenerateIntensities,
    DomainError,
    EnumerationTooLarge,
    PartitionTooLong,
    ValidationError,
)


DEFAULT_SIGNIFICAND_BITS = 256
DEFAULT_DEGENERACY_GAP = 1e-6
MIN_SIGNIFICAND_BITS = 64

# Tableau enumeration is a test oracle, not a production path.
TABLEAU_MAX_WEIGHT = 20
TABLEAU_MAX_VARS = 6


@dataclass(frozen=True)
class PrecisionConfig:
    """Working precision and the intensity degeneracy threshold."""

    significand_bits: int = DEFAULT_SIGNIFICAND_BITS
    degeneracy_gap: float = DEFAULT_DEGENERACY_GAP

    def __post_init__(self) -> None:
        if int(self.significand_bits) < MIN_SIGNIFICAND_BITS:
            raise ValidationError(
                f"significand_bits must be >= {MIN_SIGNIFICAND_BITS}, got {self.significand_bits}"
            )
        if float(self.degeneracy_gap) < 0:
            raise ValidationError("degeneracy_gap must be >= 0")

    def workprec(self):
        """Context manager running mpmath at this precision."""
        return mpmath.workprec(int(self.significand_bits))


DEFAULT_PRECISION = PrecisionConfig()


def to_mpf(value: Any) -> mpmath.mpf:
    """Convert to mpf at the current precision without a binary-float detour."""
    if isinstance(value, mpmath.mpf):
        return +value
    if isinstance(value, Fraction):
        return mpmath.mpf(value.numerator) / value.denominator
    if isinstance(value, int):
        return mpmath.mpf(value)
    return mpmath.mpf(str(value).strip())


# ── Partitions ──

@dataclass(frozen=True)
class Partition:
    """Weakly decreasing sequence of positive integers."""

    parts: Tuple[int, ...] = ()

    def __post_init__(self) -> None:
        parts = tuple(int(p) for p in self.parts)
        if any(p < 1 for p in parts):
            raise ValidationError(f"Partition parts must be positive: {parts}")
        if any(parts[i] < parts[i + 1] for i in range(len(parts) - 1)):
            raise ValidationError(f"Partition parts must be weakly decreasing: {parts}")
        object.__setattr__(self, "parts", parts)

    @classmethod
    def hook(cls, a: int, b: int) -> "Partition":
        """alpha(a, b) = (a, 1, ..., 1) with b trailing ones."""
        if a < 1 or b < 0:
            raise ValidationError(f"hook needs a >= 1 and b >= 0, got a={a}, b={b}")
        return cls((a,) + (1,) * b)

    @classmethod
    def row(cls, a: int) -> "Partition":
        """Single-row partition (a); the empty partition when a == 0."""
        if a < 0:
            raise ValidationError(f"row length must be >= 0, got {a}")
        return cls((a,) if a else ())

    @property
    def weight(self) -> int:
        return sum(self.parts)

    @property
    def is_hook(self) -> bool:
        return len(self.parts) > 0 and all(p == 1 for p in self.parts[1:])

    def padded(self, length: int) -> Tuple[int, ...]:
        if len(self.parts) > length:
            raise PartitionTooLong(
                f"Partition {self.parts} has {len(self.parts)} rows but only {length} variables"
            )
        return self.parts + (0,) * (length - len(self.parts))

    def __len__(self) -> int:
        return len(self.parts)

    def __iter__(self) -> Iterator[int]:
        return iter(self.parts)


def iter_partitions(weight: int, max_rows: int) -> Iterator[Partition]:
    """All partitions of ``weight`` with at most ``max_rows`` rows."""

    def _gen(remaining: int, largest: int, rows_left: int) -> Iterator[Tuple[int, ...]]:
        if remaining == 0:
            yield ()
            return
        if rows_left == 0:
            return
        for first in range(min(remaining, largest), 0, -1):
            for rest in _gen(remaining - first, first, rows_left - 1):
                yield (first,) + rest

    for parts in _gen(weight, weight, max_rows):
        yield Partition(parts)


# ── Vandermonde ──

def check_distinct(mu: Sequence[Any], gap: float = DEFAULT_DEGENERACY_GAP) -> None:
    """Reject intensity lists with a relative spacing below ``gap``."""
    xs = sorted(to_mpf(x) for x in mu)
    if len(xs) < 2:
        return
    top = max(abs(x) for x in xs)
    if top == 0:
        raise DegenerateIntensities("all intensities are zero")
    worst = min(xs[i + 1] - xs[i] for i in range(len(xs) - 1)) / top
    if worst < to_mpf(gap):
        raise DegenerateIntensities(
            f"intensities too close: relative gap {mpmath.nstr(worst, 5)} < {gap}",
            gap=mpmath.nstr(worst, 10),
            threshold=gap,
        )


def vandermonde(mu: Sequence[Any], precision: PrecisionConfig = DEFAULT_PRECISION) -> mpmath.mpf:
    """Product over i < j of (mu_j - mu_i)."""
    with precision.workprec():
        xs = [to_mpf(x) for x in mu]
        check_distinct(xs, precision.degeneracy_gap)
        out = mpmath.mpf(1)
        for j in range(len(xs)):
            for i in range(j):
                out *= xs[j] - xs[i]
        return out


def _alternant(exponents: Sequence[int], xs: Sequence[mpmath.mpf]) -> mpmath.matrix:
    return mpmath.matrix([[x ** e for e in exponents] for x in xs])


def schur_bialternant(
    lam: Partition,
    mu: Sequence[Any],
    precision: PrecisionConfig = DEFAULT_PRECISION,
) -> mpmath.mpf:
    """Schur polynomial as alternant / Vandermonde."""
    with precision.workprec():
        xs = [to_mpf(x) for x in mu]
        size = len(xs)
        padded = lam.padded(size)
        check_distinct(xs, precision.degeneracy_gap)
        # Column j carries exponent j + lambda_{M-j} (1-based lambda).
        exponents = [j + padded[size - 1 - j] for j in range(size)]
        return mpmath.det(_alternant(exponents, xs)) / vandermonde(xs, precision)


def semistandard_tableaux(lam: Partition, nvars: int) -> Iterator[Tuple[Tuple[int, ...], ...]]:
    """Yield every semistandard tableau of shape ``lam`` with entries 1..nvars.

    Rows weakly increase, columns strictly increase.
    """
    shape = lam.parts
    if len(shape) > nvars:
        return
    cells = [(r, c) for r, length in enumerate(shape) for c in range(length)]
    grid = [[0] * length for length in shape]

    def _fill(pos: int) -> Iterator[Tuple[Tuple[int, ...], ...]]:
        if pos == len(cells):
            yield tuple(tuple(row) for row in grid)
            return
        r, c = cells[pos]
        low = 1
        if c > 0:
            low = max(low, grid[r][c - 1])
        if r > 0:
            low = max(low, grid[r - 1][c] + 1)
        # Room must remain for the cells below in this column.
        below = sum(1 for rr in range(r + 1, len(shape)) if shape[rr] > c)
        for v in range(low, nvars - below + 1):
            grid[r][c] = v
            yield from _fill(pos + 1)
        grid[r][c] = 0

    yield from _fill(0)


def _check_enumeration(lam: Partition, nvars: int, max_weight: int, max_vars: int) -> None:
    if lam.weight > max_weight or nvars > max_vars:
        raise EnumerationTooLarge(
            f"tableau enumeration capped at weight <= {max_weight} and M <= {max_vars}; "
            f"got weight {lam.weight}, M {nvars}"
        )


def schur_tableaux(
    lam: Partition,
    mu: Sequence[Any],
    precision: PrecisionConfig = DEFAULT_PRECISION,
    max_weight: int = TABLEAU_MAX_WEIGHT,
    max_vars: int = TABLEAU_MAX_VARS,
) -> mpmath.mpf:
    """Schur polynomial as a sum of monomials over semistandard tableaux."""
    nvars = len(mu)
    lam.padded(nvars)
    _check_enumeration(lam, nvars, max_weight, max_vars)
    with precision.workprec():
        xs = [to_mpf(x) for x in mu]
        powers = [[x ** k for k in range(lam.weight + 1)] for x in xs]
        total = mpmath.mpf(0)
        for tableau in semistandard_tableaux(lam, nvars):
            counts = [0] * nvars
            for row in tableau:
                for v in row:
                    counts[v - 1] += 1
            term = mpmath.mpf(1)
            for i, k in enumerate(counts):
                term *= powers[i][k]
            total += term
        return total


def count_tableaux(
    lam: Partition,
    nvars: int,
    max_weight: int = TABLEAU_MAX_WEIGHT,
    max_vars: int = TABLEAU_MAX_VARS,
) -> int:
    lam.padded(nvars)
    _check_enumeration(lam, nvars, max_weight, max_vars)
    return sum(1 for _ in semistandard_tableaux(lam, nvars))


def schur_at_ones(lam: Partition, nvars: int) -> Fraction:
    """s_lambda(1, ..., 1) exactly, via the content product formula."""
    padded = lam.padded(nvars)
    out = Fraction(1)
    for i in range(nvars):
        for j in range(i + 1, nvars):
            out *= Fraction(padded[i] - padded[j] + j - i, j - i)
    return out


def schur_upper_bound(
    lam: Partition,
    mu: Sequence[Any],
    precision: PrecisionConfig = DEFAULT_PRECISION,
) -> mpmath.mpf:
    """(max mu)^|lambda| * s_lambda(1, ..., 1); dominates s_lambda(mu) for mu > 0."""
    with precision.workprec():
        xs = [to_mpf(x) for x in mu]
        if any(x <= 0 for x in xs):
            raise DomainError("schur_upper_bound needs positive intensities")
        return max(xs) ** lam.weight * to_mpf(schur_at_ones(lam, len(xs)))


# ── Symmetric polynomials and hooks ──

def complete_homogeneous(k: int, mu: Sequence[Any]) -> List[mpmath.mpf]:
    """[h_0, ..., h_k] at the current precision (positive recursion)."""
    h = [mpmath.mpf(1)] + [mpmath.mpf(0)] * k
    for x in mu:
        x = to_mpf(x)
        for j in range(1, k + 1):
            h[j] += x * h[j - 1]
    return h


def elementary(mu: Sequence[Any]) -> List[mpmath.mpf]:
    """[e_0, ..., e_M] at the current precision."""
    e = [mpmath.mpf(1)] + [mpmath.mpf(0)] * len(mu)
    for x in mu:
        x = to_mpf(x)
        for j in range(len(e) - 1, 0, -1):
            e[j] += x * e[j - 1]
    return e


def hook_schur(
    a: int,
    b: int,
    mu: Sequence[Any],
    precision: PrecisionConfig = DEFAULT_PRECISION,
) -> mpmath.mpf:
    """s_{alpha(a, b)}(mu) = sum_k (-1)^k h_{a+k} e_{b-k}.

    Works for coincident intensities; needs no determinant.
    """
    if a < 1 or b < 0:
        raise ValidationError(f"hook needs a >= 1 and b >= 0, got a={a}, b={b}")
    if b + 1 > len(mu):
        raise PartitionTooLong(f"hook ({a}, 1^{b}) has {b + 1} rows but only {len(mu)} variables")
    with precision.workprec():
        h = complete_homogeneous(a + b, mu)
        e = elementary(mu)
        total = mpmath.mpf(0)
        for k in range(b + 1):
            term = h[a + k] * e[b - k]
            total += -term if k % 2 else term
        return total


def row_schur(
    a: int,
    mu: Sequence[Any],
    precision: PrecisionConfig = DEFAULT_PRECISION,
) -> mpmath.mpf:
    """s_{(a)} = h_a."""
    with precision.workprec():
        return complete_homogeneous(a, mu)[a]


def schur(
    lam: Partition,
    mu: Sequence[Any],
    precision: PrecisionConfig = DEFAULT_PRECISION,
) -> mpmath.mpf:
    """Dispatch: hook fast path when possible, otherwise the bialternant."""
    if len(lam) == 0:
        lam.padded(len(mu))
        return mpmath.mpf(1)
    if lam.is_hook:
        return hook_schur(lam.parts[0], len(lam) - 1, mu, precision)
    return schur_bialternant(lam, mu, precision)


def k_ratio(
    m: int,
    mu: Sequence[Any],
    precision: PrecisionConfig = DEFAULT_PRECISION,
) -> mpmath.mpf:
    """K_m = s_{alpha(m-M, M-1)}(mu) / s_{(m-M)}(mu) for m > M."""
    size = len(mu)
    if m <= size:
        raise DomainError(f"k_ratio needs m > M, got m={m}, M={size}")
    check_distinct(mu, precision.degeneracy_gap)
    with precision.workprec():
        return hook_schur(m - size, size - 1, mu, precision) / row_schur(m - size, mu, precision)


def k_ratio_pieri(
    m: int,
    mu: Sequence[Any],
    precision: PrecisionConfig = DEFAULT_PRECISION,
) -> mpmath.mpf:
    """Same ratio written as (prod mu) * h_{m-M-1} / h_{m-M}."""
    size = len(mu)
    if m <= size:
        raise DomainError(f"k_ratio needs m > M, got m={m}, M={size}")
    with precision.workprec():
        h = complete_homogeneous(m - size, mu)
        return elementary(mu)[size] * h[m - size - 1] / h[m - size]


def two_row_gap(
    a: int,
    mu: Sequence[Any],
    precision: PrecisionConfig = DEFAULT_PRECISION,
) -> mpmath.mpf:
    """h_a^2 - h_{a+1} h_{a-1}, which equals s_{(a, a)}."""
    if a < 1:
        raise DomainError(f"two_row_gap needs a >= 1, got {a}")
    with precision.workprec():
        h = complete_homogeneous(a + 1, mu)
        return h[a] * h[a] - h[a + 1] * h[a - 1]


def pieri_row_product(
    a: int,
    b: int,
    mu: Sequence[Any],
    precision: PrecisionConfig = DEFAULT_PRECISION,
) -> mpmath.mpf:
    """sum over c of s_{(a+b-c, c)}, the expansion of s_{(a)} * s_{(b)}."""
    with precision.workprec():
        total = mpmath.mpf(0)
        for c in range(min(a, b) + 1):
            total += schur(Partition(tuple(p for p in (a + b - c, c) if p)), mu, precision)
        return total
