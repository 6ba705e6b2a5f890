"""Brute-force check of the closed-form bounds.

The truncated problem keeps y_1..y_N with 0 <= y_n <= 1 and the M equality
constraints, then minimises or maximises one coordinate. It is solved by a
bounded-variable simplex in the same mpmath precision as the bounds engine
(phase 1 with artificials, Bland's rule for entering and leaving choices)
or, for small N, by enumerating every vertex.
"""

from __future__ import annotations

import itertools
import logging
import random
from dataclasses import dataclass, field
from typing import Any, List, Optional, Sequence, Tuple

import mpmath

from .bounds import BoundsReport, poisson_tail, solver_tolerance
from .errors import DecoyBoundsError, DomainError, EnumerationTooLarge, InfeasibleData
from .model import IntensitySet, MeasurementRecord, push_forward
from .symfunc import DEFAULT_PRECISION, PrecisionConfig, check_distinct, to_mpf

logger = logging.getLogger(__name__)

DEFAULT_N_TRUNC = 40
TAIL_MARGIN = 20
ENUMERATION_MAX_N = 12
MAX_ITER_FACTOR = 50


class Infeasible(InfeasibleData):
    """Phase 1 could not drive the artificial variables to zero."""


@dataclass(frozen=True)
class TruncatedLP:
    """min or max y_target subject to sum_{n<=N} mu_i^n/n! y_n = rhs_i and 0 <= y <= 1.

    With ``tail_ones`` the variables above N are taken to be 1 and their
    contribution is removed from the right-hand side.
    """

    mu: Tuple[Any, ...]
    rhs: Tuple[Any, ...]
    N: int
    target: int = 1
    maximize: bool = False
    tail_ones: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "mu", tuple(self.mu))
        object.__setattr__(self, "rhs", tuple(self.rhs))
        if len(self.rhs) != len(self.mu):
            raise DomainError(f"{len(self.rhs)} right-hand sides for {len(self.mu)} intensities")
        if self.N < len(self.mu):
            raise DomainError(f"truncation N={self.N} below M={len(self.mu)}")
        if not 1 <= self.target <= self.N:
            raise DomainError(f"target index {self.target} outside 1..{self.N}")

    @property
    def M(self) -> int:
        return len(self.mu)

    def build(self) -> Tuple[List[List[mpmath.mpf]], List[mpmath.mpf]]:
        """Constraint matrix and right-hand side at the current precision."""
        xs = [to_mpf(x) for x in self.mu]
        rows = []
        rhs = []
        for x, r in zip(xs, self.rhs):
            row = []
            weight = mpmath.mpf(1)
            for n in range(1, self.N + 1):
                weight = weight * x / n
                row.append(weight)
            rows.append(row)
            value = to_mpf(r)
            if self.tail_ones:
                value -= poisson_tail(x, self.N)
            rhs.append(value)
        return rows, rhs


@dataclass(frozen=True)
class LPResult:
    value: mpmath.mpf
    y: Tuple[mpmath.mpf, ...]
    iterations: int = 0


# ── Bounded-variable simplex ──

class _BoundedSimplex:
    """Tableau simplex over 0 <= x_j <= upper_j (upper None means unbounded)."""

    def __init__(self, rows: List[List[mpmath.mpf]], rhs: List[mpmath.mpf], tol: mpmath.mpf):
        self.m = len(rows)
        self.n_struct = len(rows[0])
        self.tol = tol
        self.T: List[List[mpmath.mpf]] = []
        self.xB: List[mpmath.mpf] = []
        for i, (row, b) in enumerate(zip(rows, rhs)):
            sign = -1 if b < 0 else 1
            art = [mpmath.mpf(1) if k == i else mpmath.mpf(0) for k in range(self.m)]
            self.T.append([sign * v for v in row] + art)
            self.xB.append(sign * b)
        self.n = self.n_struct + self.m
        self.upper: List[Optional[mpmath.mpf]] = [mpmath.mpf(1)] * self.n_struct + [None] * self.m
        self.at_upper = [False] * self.n
        self.basis = list(range(self.n_struct, self.n))
        self.iterations = 0

    def _is_fixed(self, j: int) -> bool:
        return self.upper[j] is not None and self.upper[j] == 0

    def _reduced_costs(self, cost: List[mpmath.mpf]) -> List[mpmath.mpf]:
        cb = [cost[b] for b in self.basis]
        out = []
        for j in range(self.n):
            d = cost[j]
            for i in range(self.m):
                if cb[i]:
                    d -= cb[i] * self.T[i][j]
            out.append(d)
        return out

    def _entering(self, d: List[mpmath.mpf]) -> Optional[int]:
        basic = set(self.basis)
        for j in range(self.n):
            if j in basic or self._is_fixed(j):
                continue
            if not self.at_upper[j] and d[j] < -self.tol:
                return j
            if self.at_upper[j] and d[j] > self.tol:
                return j
        return None

    def _step(self, j: int) -> None:
        s = -1 if self.at_upper[j] else 1
        best: Optional[mpmath.mpf] = None
        leave_row: Optional[int] = None
        leave_to_upper = False
        for i in range(self.m):
            rate = s * self.T[i][j]
            if rate > self.tol:
                theta = self.xB[i] / rate
                to_upper = False
            elif rate < -self.tol and self.upper[self.basis[i]] is not None:
                theta = (self.upper[self.basis[i]] - self.xB[i]) / (-rate)
                to_upper = True
            else:
                continue
            theta = max(theta, mpmath.mpf(0))
            if (
                best is None
                or theta < best
                or (theta == best and self.basis[i] < self.basis[leave_row])
            ):
                best, leave_row, leave_to_upper = theta, i, to_upper
        flip = self.upper[j]
        if flip is not None and (best is None or flip <= best):
            for i in range(self.m):
                self.xB[i] -= s * flip * self.T[i][j]
            self.at_upper[j] = not self.at_upper[j]
            return
        if best is None:
            raise DecoyBoundsError("linear program is unbounded")

        for i in range(self.m):
            self.xB[i] -= s * best * self.T[i][j]
        start = self.upper[j] if self.at_upper[j] else mpmath.mpf(0)
        entering_value = start + s * best

        leaving = self.basis[leave_row]
        self.at_upper[leaving] = leave_to_upper
        pivot = self.T[leave_row][j]
        prow = [v / pivot for v in self.T[leave_row]]
        self.T[leave_row] = prow
        for i in range(self.m):
            if i == leave_row:
                continue
            factor = self.T[i][j]
            if factor:
                row = self.T[i]
                self.T[i] = [a - factor * b for a, b in zip(row, prow)]
        self.basis[leave_row] = j
        self.xB[leave_row] = entering_value
        self.at_upper[j] = False

    def run(self, cost: List[mpmath.mpf]) -> None:
        limit = MAX_ITER_FACTOR * self.n
        while True:
            j = self._entering(self._reduced_costs(cost))
            if j is None:
                return
            self._step(j)
            self.iterations += 1
            if self.iterations > limit:
                raise DecoyBoundsError(f"simplex did not converge in {limit} iterations")

    def values(self) -> List[mpmath.mpf]:
        out = []
        for j in range(self.n):
            out.append(self.upper[j] if self.at_upper[j] and self.upper[j] is not None else mpmath.mpf(0))
        for i, b in enumerate(self.basis):
            out[b] = self.xB[i]
        return out

    def solve(self, target: int, maximize: bool) -> LPResult:
        phase1 = [mpmath.mpf(0)] * self.n_struct + [mpmath.mpf(1)] * self.m
        self.run(phase1)
        residual = mpmath.fsum(self.values()[self.n_struct:])
        scale = max([abs(v) for v in self.xB] + [mpmath.mpf(1)])
        if residual > self.tol * scale:
            raise Infeasible(
                f"truncated linear program is infeasible (phase-1 residual {mpmath.nstr(residual, 5)})"
            )
        for k in range(self.n_struct, self.n):
            self.upper[k] = mpmath.mpf(0)
            self.at_upper[k] = False
        logger.debug(f"phase 1 finished after {self.iterations} pivots")

        cost = [mpmath.mpf(0)] * self.n
        cost[target - 1] = mpmath.mpf(-1) if maximize else mpmath.mpf(1)
        self.run(cost)
        y = self.values()[: self.n_struct]
        y = [min(max(v, mpmath.mpf(0)), mpmath.mpf(1)) for v in y]
        return LPResult(value=y[target - 1], y=tuple(y), iterations=self.iterations)


def lp_extremize(lp: TruncatedLP, precision: PrecisionConfig = DEFAULT_PRECISION) -> LPResult:
    """Exact optimum of the truncated box-constrained problem."""
    with precision.workprec():
        check_distinct(lp.mu, precision.degeneracy_gap)
        rows, rhs = lp.build()
        simplex = _BoundedSimplex(rows, rhs, solver_tolerance(precision))
        result = simplex.solve(lp.target, lp.maximize)
        logger.debug(
            f"lp {'max' if lp.maximize else 'min'} y_{lp.target} at N={lp.N}: "
            f"{mpmath.nstr(result.value, 20)} after {result.iterations} pivots"
        )
        return result


def enumerate_vertices(lp: TruncatedLP, precision: PrecisionConfig = DEFAULT_PRECISION) -> LPResult:
    """Optimum over every basic feasible point; only for N <= 12."""
    if lp.N > ENUMERATION_MAX_N:
        raise EnumerationTooLarge(f"vertex enumeration capped at N <= {ENUMERATION_MAX_N}, got {lp.N}")
    with precision.workprec():
        rows, rhs = lp.build()
        tol = solver_tolerance(precision)
        size = lp.M
        b = mpmath.matrix(rhs)
        best: Optional[LPResult] = None
        for cols in itertools.combinations(range(lp.N), size):
            basis = mpmath.matrix([[rows[i][c] for c in cols] for i in range(size)])
            try:
                inv = mpmath.inverse(basis)
            except ZeroDivisionError:
                continue
            base = inv * b
            others = [c for c in range(lp.N) if c not in cols]
            shifts = {c: inv * mpmath.matrix([rows[i][c] for i in range(size)]) for c in others}
            for assignment in itertools.product((0, 1), repeat=len(others)):
                vals = [base[k] for k in range(size)]
                for c, bit in zip(others, assignment):
                    if bit:
                        for k in range(size):
                            vals[k] -= shifts[c][k]
                if any(v < -tol or v > 1 + tol for v in vals):
                    continue
                y = [mpmath.mpf(0)] * lp.N
                for c, bit in zip(others, assignment):
                    y[c] = mpmath.mpf(bit)
                for k, c in enumerate(cols):
                    y[c] = vals[k]
                value = y[lp.target - 1]
                if (
                    best is None
                    or (lp.maximize and value > best.value)
                    or (not lp.maximize and value < best.value)
                ):
                    best = LPResult(value=value, y=tuple(y))
        if best is None:
            raise Infeasible("no feasible vertex")
        return best


# ── Sampling ──

@dataclass(frozen=True)
class FeasibleSample:
    y: Tuple[mpmath.mpf, ...]
    record: MeasurementRecord


def sample_feasible(
    intensities: IntensitySet,
    N: int,
    count: int,
    seed: Optional[int] = None,
    precision: PrecisionConfig = DEFAULT_PRECISION,
) -> List[FeasibleSample]:
    """Random yield vectors in [0, 1]^N (zero above N) and the data they produce."""
    rng = random.Random(seed)
    out: List[FeasibleSample] = []
    for _ in range(count):
        y = tuple(mpmath.mpf(rng.random()) for _ in range(N))
        record = push_forward(y, intensities, precision=precision)
        out.append(FeasibleSample(y=y, record=record))
    return out


# ── Report verification ──

@dataclass(frozen=True)
class IntervalCheck:
    n: int
    lp_min: mpmath.mpf
    lp_max: mpmath.mpf
    delta_lo: mpmath.mpf
    delta_hi: mpmath.mpf
    ok: bool


@dataclass(frozen=True)
class Verification:
    n_trunc: int
    checks: Tuple[IntervalCheck, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def max_delta(self) -> mpmath.mpf:
        return max([max(abs(c.delta_lo), abs(c.delta_hi)) for c in self.checks] + [mpmath.mpf(0)])


def default_truncation(L0: Optional[int], n_trunc: int = DEFAULT_N_TRUNC) -> int:
    return max(n_trunc, (L0 or 0) + TAIL_MARGIN)


def verify_report(
    report: BoundsReport,
    precision: PrecisionConfig = DEFAULT_PRECISION,
    n_trunc: int = DEFAULT_N_TRUNC,
    tolerance: Any = "1e-10",
) -> Verification:
    """Solve min and max of every y_n, n <= M, and compare with the report.

    Exact intervals must match both ends; otherwise the optimum must lie
    inside the reported interval.
    """
    N = default_truncation(report.z.L0, n_trunc)
    mu = report.record.intensities.mu
    checks: List[IntervalCheck] = []
    with precision.workprec():
        tol = to_mpf(tolerance)
        for interval in report.intervals:
            lo = lp_extremize(TruncatedLP(mu, report.rhs, N, interval.n, False), precision).value
            hi = lp_extremize(TruncatedLP(mu, report.rhs, N, interval.n, True), precision).value
            d_lo = lo - interval.lo
            d_hi = hi - interval.hi
            if interval.exact:
                ok = abs(d_lo) <= tol and abs(d_hi) <= tol
            else:
                ok = d_lo >= -tol and d_hi <= tol
            if not ok:
                logger.warning(
                    f"oracle disagrees at n={interval.n}: lp [{mpmath.nstr(lo, 15)}, {mpmath.nstr(hi, 15)}] "
                    f"vs bounds [{mpmath.nstr(interval.lo, 15)}, {mpmath.nstr(interval.hi, 15)}]"
                )
            checks.append(IntervalCheck(interval.n, lo, hi, d_lo, d_hi, bool(ok)))
    return Verification(n_trunc=N, checks=tuple(checks))
