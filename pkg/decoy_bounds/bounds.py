"""Extremal yield configurations and per-photon-number intervals.

For intensities mu_1 < ... < mu_M the measured data fix

    sum_n mu_i^n / n! * y_n = rhs_i,    rhs_i = exp(mu_i) Q_+(mu_i)

for every i. Two configurations bracket each y_n with n <= M:

  X   the unique solution supported on 1..M (everything above M is zero);
  Z   zero on M < n < L0, a0 at L0 and one beyond, with (L0, a0) the
      smallest pair (smallest L, then largest a) keeping Z_M >= 0.

X_n is the lower end of the interval when M - n is odd and the upper end
when it is even; Z_n takes the other end. With mu_M <= 1 and both
configurations inside [0, 1] the ends are attained, so the interval is
exact rather than merely valid.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import mpmath

from .errors import CapExceeded, DomainError, InfeasibleData
from .model import ChannelParams, MeasurementRecord, to_constraint_rhs, yield_q
from .symfunc import (
    DEFAULT_PRECISION,
    PrecisionConfig,
    check_distinct,
    hook_schur,
    to_mpf,
)

logger = logging.getLogger(__name__)

DEFAULT_CAP = 200
CROSSCHECK_REL_TOL = "1e-20"

BRANCH_SATURATED = "saturated"
BRANCH_ROOT = "root"
BRANCH_PINNED = "pinned"


def solver_tolerance(precision: PrecisionConfig = DEFAULT_PRECISION) -> mpmath.mpf:
    """Zero threshold for quantities produced by determinant solves."""
    with precision.workprec():
        return mpmath.mpf(2) ** (-int(0.6 * precision.significand_bits))


# ── Linear system ──

class ConstraintSystem:
    """The M x M system sum_n mu_i^n / n! * y_n = rhs_i, solved by Cramer's rule.

    Must be used inside the precision context it was built under.
    """

    def __init__(self, mu: Sequence[Any], precision: PrecisionConfig = DEFAULT_PRECISION):
        self.precision = precision
        self.xs = [to_mpf(x) for x in mu]
        check_distinct(self.xs, precision.degeneracy_gap)
        self.M = len(self.xs)
        self._matrix = mpmath.matrix([[x ** n for n in range(1, self.M + 1)] for x in self.xs])
        det = mpmath.mpf(1)
        for j in range(self.M):
            det *= self.xs[j]
            for i in range(j):
                det *= self.xs[j] - self.xs[i]
        self._det = det

    def solve(self, rhs: Sequence[Any]) -> List[mpmath.mpf]:
        if len(rhs) != self.M:
            raise DomainError(f"expected {self.M} right-hand sides, got {len(rhs)}")
        values = [to_mpf(r) for r in rhs]
        out: List[mpmath.mpf] = []
        for col in range(self.M):
            replaced = self._matrix.copy()
            for row in range(self.M):
                replaced[row, col] = values[row]
            out.append(mpmath.det(replaced) / self._det * mpmath.factorial(col + 1))
        return out

    def residual(self, y: Sequence[Any], rhs: Sequence[Any]) -> mpmath.mpf:
        """Largest |sum_n mu_i^n/n! y_n - rhs_i| over i."""
        worst = mpmath.mpf(0)
        for i, x in enumerate(self.xs):
            total = mpmath.fsum(x ** n / mpmath.factorial(n) * to_mpf(v) for n, v in enumerate(y, start=1))
            worst = max(worst, abs(total - to_mpf(rhs[i])))
        return worst


def poisson_tail(mu: Any, L: int, precision: PrecisionConfig = DEFAULT_PRECISION) -> mpmath.mpf:
    """sum_{n > L} mu^n / n!, summed forward from n = L + 1."""
    with precision.workprec():
        x = to_mpf(mu)
        term = x ** (L + 1) / mpmath.factorial(L + 1)
        total = mpmath.mpf(0)
        n = L + 1
        while term > 0:
            total += term
            n += 1
            term = term * x / n
            if n > x and term <= mpmath.eps * total:
                break
        return total


# ── X configuration ──

@dataclass(frozen=True)
class XConfiguration:
    """Solution of the constraint system supported on 1..M."""

    values: Tuple[mpmath.mpf, ...]
    rhs: Tuple[mpmath.mpf, ...]
    mu: Tuple[mpmath.mpf, ...]
    x1_crosscheck: mpmath.mpf = mpmath.mpf(0)

    @property
    def M(self) -> int:
        return len(self.values)

    def __getitem__(self, n: int) -> mpmath.mpf:
        """X_n with X_n = 0 for n > M."""
        if n < 1:
            raise IndexError(n)
        return self.values[n - 1] if n <= self.M else mpmath.mpf(0)


def x1_lagrange(rhs: Sequence[Any], mu: Sequence[Any], precision: PrecisionConfig = DEFAULT_PRECISION) -> mpmath.mpf:
    """X_1 = sum_i (rhs_i / mu_i) prod_{j != i} mu_j / (mu_j - mu_i)."""
    with precision.workprec():
        xs = [to_mpf(x) for x in mu]
        total = mpmath.mpf(0)
        for i, xi in enumerate(xs):
            term = to_mpf(rhs[i]) / xi
            for j, xj in enumerate(xs):
                if j != i:
                    term *= xj / (xj - xi)
            total += term
        return total


def compute_x(rhs: Sequence[Any], mu: Sequence[Any], precision: PrecisionConfig = DEFAULT_PRECISION) -> XConfiguration:
    with precision.workprec():
        system = ConstraintSystem(mu, precision)
        values = system.solve(rhs)
        primary = x1_lagrange(rhs, system.xs, precision)
        scale = max(abs(primary), abs(values[0]))
        rel = abs(primary - values[0]) / scale if scale > 0 else mpmath.mpf(0)
        if rel > to_mpf(CROSSCHECK_REL_TOL):
            logger.warning(
                f"X_1 Lagrange and Cramer paths disagree: relative gap {mpmath.nstr(rel, 5)}"
            )
        values[0] = primary
        return XConfiguration(
            values=tuple(values),
            rhs=tuple(to_mpf(r) for r in rhs),
            mu=tuple(system.xs),
            x1_crosscheck=rel,
        )


# ── w-vectors ──

@dataclass(frozen=True)
class WVector:
    """Kernel direction w^(m): entries for n <= M, w_m = 1, zero elsewhere."""

    m: int
    head: Tuple[mpmath.mpf, ...]

    @property
    def M(self) -> int:
        return len(self.head)

    def __getitem__(self, n: int) -> mpmath.mpf:
        if n < 1:
            raise IndexError(n)
        if n <= self.M:
            return self.head[n - 1]
        if n == self.m:
            return mpmath.mpf(1)
        return mpmath.mpf(0)


def w_vector(m: int, mu: Sequence[Any], precision: PrecisionConfig = DEFAULT_PRECISION) -> WVector:
    """w^(m)_n = (-1)^(M-n+1) n!/m! s_{(m-M, 1^(M-n))}(mu) for n <= M."""
    size = len(mu)
    if m <= size:
        raise DomainError(f"w_vector needs m > M, got m={m}, M={size}")
    with precision.workprec():
        head = []
        for n in range(1, size + 1):
            sign = -1 if (size - n + 1) % 2 else 1
            coeff = mpmath.factorial(n) / mpmath.factorial(m)
            head.append(sign * coeff * hook_schur(m - size, size - n, mu, precision))
        return WVector(m=m, head=tuple(head))


def gvm_vector(m: int, mu: Sequence[Any], precision: PrecisionConfig = DEFAULT_PRECISION) -> Dict[int, mpmath.mpf]:
    """Unnormalised kernel vector x^(m) built from generalized Vandermonde determinants.

    x_n = (-1)^(M-n+1) n! det[mu_i^k for k in {1..M} without n, then mu_i^m]
    x_m = m! det[mu_i^k for k in 1..M], so that w^(m)_n = x_n / x_m.
    """
    size = len(mu)
    if m <= size:
        raise DomainError(f"gvm_vector needs m > M, got m={m}, M={size}")
    with precision.workprec():
        xs = [to_mpf(x) for x in mu]
        out: Dict[int, mpmath.mpf] = {}
        for n in range(1, size + 1):
            powers = [k for k in range(1, size + 1) if k != n] + [m]
            det = mpmath.det(mpmath.matrix([[x ** k for k in powers] for x in xs]))
            sign = -1 if (size - n + 1) % 2 else 1
            out[n] = sign * mpmath.factorial(n) * det
        full = mpmath.matrix([[x ** k for k in range(1, size + 1)] for x in xs])
        out[m] = mpmath.factorial(m) * mpmath.det(full)
        return out


def difference_expansion(
    y: Sequence[Any],
    mu: Sequence[Any],
    precision: PrecisionConfig = DEFAULT_PRECISION,
) -> List[mpmath.mpf]:
    """sum_{m > M} w^(m)_n y_m for n <= M, for a finite-support y = (y_1, ..., y_N).

    For y consistent with the data this equals y_n - X_n.
    """
    size = len(mu)
    with precision.workprec():
        out = [mpmath.mpf(0)] * size
        for m in range(size + 1, len(y) + 1):
            ym = to_mpf(y[m - 1])
            if ym == 0:
                continue
            w = w_vector(m, mu, precision)
            for n in range(size):
                out[n] += w.head[n] * ym
        return out


# ── Z configuration ──

def g_function(
    mu: Any,
    L: int,
    a: Any,
    qplus: Any,
    precision: PrecisionConfig = DEFAULT_PRECISION,
) -> mpmath.mpf:
    """exp(mu) qplus - (exp(mu) - sum_{n<=L} mu^n/n!) - a mu^L / L!."""
    with precision.workprec():
        x = to_mpf(mu)
        return _g_from_rhs(x, L, to_mpf(a), mpmath.exp(x) * to_mpf(qplus), precision)


def _g_from_rhs(x: mpmath.mpf, L: int, a: mpmath.mpf, rhs: mpmath.mpf, precision: PrecisionConfig) -> mpmath.mpf:
    return rhs - poisson_tail(x, L, precision) - a * x ** L / mpmath.factorial(L)


def _check_la(L: int, a: Any, size: int) -> None:
    if L <= size:
        raise DomainError(f"L must exceed M={size}, got {L}")
    if not 0 <= to_mpf(a) <= 1:
        raise DomainError(f"a must lie in [0, 1], got {a}")


def z_vector(
    L: int,
    a: Any,
    rhs: Sequence[Any],
    mu: Sequence[Any],
    precision: PrecisionConfig = DEFAULT_PRECISION,
) -> List[mpmath.mpf]:
    """First M entries of the configuration (0 on M<n<L, a at L, 1 beyond) matching rhs."""
    with precision.workprec():
        system = ConstraintSystem(mu, precision)
        _check_la(L, a, system.M)
        return _z_solve(system, L, to_mpf(a), rhs)


def _z_solve(system: ConstraintSystem, L: int, a: mpmath.mpf, rhs: Sequence[Any]) -> List[mpmath.mpf]:
    shifted = [_g_from_rhs(x, L, a, to_mpf(r), system.precision) for x, r in zip(system.xs, rhs)]
    return system.solve(shifted)


def l0_cap(
    x_M: Any,
    M: int,
    p: Optional[ChannelParams] = None,
    mu_max: Any = None,
    user_cap: int = DEFAULT_CAP,
    precision: PrecisionConfig = DEFAULT_PRECISION,
) -> int:
    """Largest L > M with L (L - M)! <= M e / x_M.

    Falls back to q_M as the denominator when x_M is unavailable. The bound
    only holds for mu_max <= 1; otherwise ``user_cap`` is returned.
    """
    with precision.workprec():
        if mu_max is not None and to_mpf(mu_max) > 1:
            return user_cap
        denom = to_mpf(x_M) if x_M is not None else None
        if denom is None or denom <= 0:
            if p is None:
                return user_cap
            denom = yield_q(M, p, precision)
            if denom <= 0:
                return user_cap
        bound = M * mpmath.e / denom
        L = M + 1
        while (L + 1) * math.factorial(L + 1 - M) <= bound:
            L += 1
        return L


@dataclass(frozen=True)
class SearchResult:
    L0: Optional[int]
    a0: mpmath.mpf
    branch: str
    cap: int
    path: Tuple[Tuple[int, mpmath.mpf], ...] = ()


@dataclass(frozen=True)
class ZConfiguration:
    """First M entries of Z plus the tail description (L0, a0)."""

    values: Tuple[mpmath.mpf, ...]
    L0: Optional[int]
    a0: mpmath.mpf
    branch: str
    search: Optional[SearchResult] = None

    @property
    def M(self) -> int:
        return len(self.values)

    def __getitem__(self, n: int) -> mpmath.mpf:
        """Z_n including the implicit tail."""
        if n < 1:
            raise IndexError(n)
        if n <= self.M:
            return self.values[n - 1]
        if self.L0 is None or n < self.L0:
            return mpmath.mpf(0)
        if n == self.L0:
            return self.a0
        return mpmath.mpf(1)


def find_l0_a0(
    rhs: Sequence[Any],
    mu: Sequence[Any],
    cap: int = DEFAULT_CAP,
    precision: PrecisionConfig = DEFAULT_PRECISION,
    x_M: Any = None,
) -> SearchResult:
    """Smallest (L, a) in the (smallest L, then largest a) order with z_M(L, a) >= 0.

    z_M(L, 1) grows with L and z_M(L, 0) == z_M(L + 1, 1), so the root of the
    affine map a -> z_M(L0, a) sits one step below the first L with
    z_M(L, 1) >= 0.
    """
    with precision.workprec():
        system = ConstraintSystem(mu, precision)
        size = system.M
        if cap < size + 1:
            raise DomainError(f"search cap must be >= M + 1 = {size + 1}, got {cap}")
        if x_M is None:
            x_M = system.solve(rhs)[-1]
        effective = cap
        if system.xs[-1] <= 1 and to_mpf(x_M) > 0:
            effective = min(cap, l0_cap(x_M, size, precision=precision))

        path: List[Tuple[int, mpmath.mpf]] = []
        previous: Optional[mpmath.mpf] = None
        for L in range(size + 1, effective + 2):
            z_top = _z_solve(system, L, mpmath.mpf(1), rhs)[-1]
            path.append((L, z_top))
            logger.debug(f"search L={L}: z_M(L, 1) = {mpmath.nstr(z_top, 12)}")
            if previous is not None and z_top < previous:
                logger.warning(f"z_M(L, 1) decreased at L={L}; search path is not monotone")
            if z_top >= 0:
                if L == size + 1:
                    return SearchResult(size + 1, mpmath.mpf(1), BRANCH_SATURATED, effective, tuple(path))
                z0, z1 = z_top, previous
                a0 = z0 / (z0 - z1)
                if a0 == 0:
                    return SearchResult(L, mpmath.mpf(1), BRANCH_ROOT, effective, tuple(path))
                return SearchResult(L - 1, a0, BRANCH_ROOT, effective, tuple(path))
            previous = z_top
        raise CapExceeded(
            f"no (L0, a0) with z_M >= 0 up to L={effective}; data inconsistent with any yield vector in [0, 1]",
            cap=effective,
        )


def compute_z(
    rhs: Sequence[Any],
    mu: Sequence[Any],
    cap: int = DEFAULT_CAP,
    precision: PrecisionConfig = DEFAULT_PRECISION,
    x: Optional[XConfiguration] = None,
) -> ZConfiguration:
    with precision.workprec():
        if x is None:
            x = compute_x(rhs, mu, precision)
        tol = solver_tolerance(precision)
        scale = max([abs(v) for v in x.values] + [mpmath.mpf(1)])
        x_top = x.values[-1]
        if x_top < -tol * scale:
            raise InfeasibleData(
                f"X_M = {mpmath.nstr(x_top, 10)} < 0: no yield vector in [0, 1] reproduces the data"
            )
        if abs(x_top) <= tol * scale:
            # Every feasible y vanishes above M-1, so the feasible set is the single point X.
            logger.debug("X_M is zero; Z coincides with X")
            return ZConfiguration(values=x.values, L0=None, a0=mpmath.mpf(0), branch=BRANCH_PINNED)

        search = find_l0_a0(rhs, mu, cap, precision, x_M=x_top)
        system = ConstraintSystem(mu, precision)
        values = _z_solve(system, search.L0, search.a0, rhs)
        if values[-1] < -tol * scale:
            logger.warning(f"Z_M = {mpmath.nstr(values[-1], 10)} is negative after the search")
        return ZConfiguration(
            values=tuple(values),
            L0=search.L0,
            a0=search.a0,
            branch=search.branch,
            search=search,
        )


# ── Intervals and reports ──

@dataclass(frozen=True)
class Interval:
    n: int
    lo: mpmath.mpf
    hi: mpmath.mpf
    exact: bool
    lo_from: str
    hi_from: str

    def contains(self, value: Any, tol: Any = 0) -> bool:
        v = to_mpf(value)
        return self.lo - to_mpf(tol) <= v <= self.hi + to_mpf(tol)


def bound_interval(
    n: int,
    x: XConfiguration,
    z: ZConfiguration,
    M: Optional[int] = None,
    params: Optional[ChannelParams] = None,
) -> Interval:
    """(X_n, Z_n) when M - n is odd, (Z_n, X_n) when even.

    ``exact`` holds when mu_M <= 1 and the channel parameters, if known,
    satisfy the model domain.
    """
    size = x.M if M is None else M
    if not 1 <= n <= size:
        raise DomainError(f"bound_interval needs 1 <= n <= M={size}, got {n}")
    exact = bool(x.mu[-1] <= 1) and (params is None or params.domain_ok)
    if (size - n) % 2:
        return Interval(n, x[n], z[n], exact, "X", "Z")
    return Interval(n, z[n], x[n], exact, "Z", "X")


@dataclass(frozen=True)
class LemmaCheck:
    """Model-based certificate for X_n.

    ``ok`` needs the excess on the expected side of q_n and X_n in [0, 1].
    ``within_estimate`` compares the excess with the closed-form estimate,
    which is informational: it fails on some in-domain channels.
    """

    n: int
    excess: mpmath.mpf
    excess_bound: mpmath.mpf
    x_in_box: bool
    within_estimate: bool
    ok: bool


def lemma_bound_checks(
    x: XConfiguration,
    p: ChannelParams,
    precision: PrecisionConfig = DEFAULT_PRECISION,
) -> List[LemmaCheck]:
    """Certify X_n / n! = q_n / n! + (-1)^(M-n) I_n with I_n >= 0 and 0 <= X_n <= 1.

    The estimate reported next to I_n is e (A eta + B) / M! when M - n is
    even and (A eta + B) / (M - 1)! when M - n is odd. Needs mu_M <= 1.
    """
    size = x.M
    out: List[LemmaCheck] = []
    with precision.workprec():
        tol = solver_tolerance(precision)
        base = to_mpf(p.A) * to_mpf(p.eta) + to_mpf(p.B)
        for n in range(1, size + 1):
            sign = -1 if (size - n) % 2 else 1
            excess = sign * (x[n] - yield_q(n, p, precision)) / mpmath.factorial(n)
            if (size - n) % 2:
                bound = base / mpmath.factorial(size - 1)
            else:
                bound = mpmath.e * base / mpmath.factorial(size)
            slack = tol * max(abs(bound), mpmath.mpf(1))
            in_box = -tol <= x[n] <= 1 + tol
            out.append(
                LemmaCheck(
                    n=n,
                    excess=excess,
                    excess_bound=bound,
                    x_in_box=bool(in_box),
                    within_estimate=bool(excess <= bound + slack),
                    ok=bool(excess >= -slack and in_box),
                )
            )
    return out


@dataclass(frozen=True)
class BoundsReport:
    record: MeasurementRecord
    mode: str
    rhs: Tuple[mpmath.mpf, ...]
    x: XConfiguration
    z: ZConfiguration
    intervals: Tuple[Interval, ...]
    exact: bool
    infeasible: bool
    warnings: Tuple[str, ...] = ()
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def M(self) -> int:
        return self.x.M

    def interval(self, n: int) -> Interval:
        return self.intervals[n - 1]


def _box_violations(values: Sequence[mpmath.mpf], label: str, tol: mpmath.mpf) -> List[str]:
    out = []
    for n, v in enumerate(values, start=1):
        if v < -tol or v > 1 + tol:
            out.append(f"{label}_{n} = {mpmath.nstr(v, 10)} outside [0, 1]")
    return out


def _lp_feasible(
    rhs: Sequence[mpmath.mpf],
    mu: Sequence[Any],
    L0: Optional[int],
    precision: PrecisionConfig,
) -> bool:
    """Phase 1 of the truncated box-constrained problem."""
    from .oracle import Infeasible, TruncatedLP, default_truncation, lp_extremize

    try:
        lp_extremize(TruncatedLP(tuple(mu), tuple(rhs), default_truncation(L0)), precision)
    except Infeasible:
        return False
    return True


def analyze(
    record: MeasurementRecord,
    precision: PrecisionConfig = DEFAULT_PRECISION,
    cap: int = DEFAULT_CAP,
    errors: bool = False,
) -> BoundsReport:
    """Constraint right-hand sides, X, Z and per-n intervals for one record.

    ``errors=True`` bounds the error products b_n from Q_i E_i instead of
    the yields.
    """
    intensities = record.intensities
    params = record.model
    warnings: List[str] = []
    diagnostics: Dict[str, Any] = {}

    with precision.workprec():
        rhs = to_constraint_rhs(record, errors=errors, precision=precision)
        x = compute_x(rhs, intensities.mu, precision)
        z = compute_z(rhs, intensities.mu, cap, precision, x=x)
        intervals = tuple(bound_interval(n, x, z, params=params) for n in range(1, x.M + 1))

        tol = solver_tolerance(precision)
        infeasible = False
        if intensities.all_le_one:
            violations = _box_violations(x.values, "X", tol) + _box_violations(z.values, "Z", tol)
            if violations:
                # An end outside [0, 1] is not attained; the interval still bounds y_n.
                intervals = tuple(replace(i, exact=False) for i in intervals)
                infeasible = not _lp_feasible(rhs, intensities.mu, z.L0, precision)
                if infeasible:
                    warnings.append("data infeasible under the detection model: " + "; ".join(violations))
                else:
                    warnings.append(
                        "configuration outside model assumptions, intervals are bounds only: "
                        + "; ".join(violations)
                    )
        else:
            warnings.append(
                f"mu_M = {intensities.mu[-1]} > 1: intervals are valid bounds but not guaranteed extrema"
            )
        if params is not None and not params.domain_ok:
            warnings.append("channel parameters outside the model domain: " + "; ".join(params.domain_problems()))

        diagnostics["x1_crosscheck"] = x.x1_crosscheck
        if z.search is not None:
            diagnostics["search_cap"] = z.search.cap
            diagnostics["search_path"] = [(L, v) for L, v in z.search.path]
        if intensities.all_le_one and x.values[-1] > 0 and z.L0 is not None:
            bound = intensities.M * mpmath.e / x.values[-1]
            diagnostics["l0_bound_ok"] = bool(z.L0 * math.factorial(z.L0 - intensities.M) <= bound)
        if params is not None and not errors and intensities.all_le_one:
            checks = lemma_bound_checks(x, params, precision)
            diagnostics["lemma_checks"] = checks
            failed = [c.n for c in checks if not c.ok]
            if failed:
                warnings.append(f"model certificate failed for n in {failed}")

    for w in warnings:
        logger.warning(w)
    if infeasible:
        logger.warning("reported intervals come from infeasible data")

    return BoundsReport(
        record=record,
        mode="errors" if errors else "yields",
        rhs=tuple(rhs),
        x=x,
        z=z,
        intervals=intervals,
        exact=all(i.exact for i in intervals),
        infeasible=infeasible,
        warnings=tuple(warnings),
        diagnostics=diagnostics,
    )
