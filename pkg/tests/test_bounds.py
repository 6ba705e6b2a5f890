import random
import unittest
from fractions import Fraction

import mpmath

from decoy_bounds.bounds import (
    BRANCH_PINNED,
    BRANCH_ROOT,
    BRANCH_SATURATED,
    ConstraintSystem,
    analyze,
    bound_interval,
    compute_x,
    compute_z,
    difference_expansion,
    find_l0_a0,
    g_function,
    gvm_vector,
    l0_cap,
    poisson_tail,
    w_vector,
    x1_lagrange,
    z_vector,
)
from decoy_bounds.errors import CapExceeded, DomainError, InfeasibleData
from decoy_bounds.model import (
    ChannelParams,
    IntensitySet,
    MeasurementRecord,
    push_forward,
    synth_qplus,
    synthesize_record,
    to_constraint_rhs,
    yield_q,
)
from decoy_bounds.symfunc import DEFAULT_PRECISION, to_mpf

REFERENCE = ChannelParams(A="1", B="1e-5", eta="1e-2")
REFERENCE_MU = ("0.07", "0.2", "0.5")


def _close(a, b, rel="1e-30"):
    with DEFAULT_PRECISION.workprec():
        a, b = to_mpf(a), to_mpf(b)
        scale = max(abs(a), abs(b))
        if scale == 0:
            return True
        return abs(a - b) / scale <= to_mpf(rel)


def _random_mu(rng, size, low=20, high=1000):
    return [Fraction(v, 1000) for v in sorted(rng.sample(range(low, high + 1), size))]


def _rhs_for(y, mu):
    """exp(mu_i) Q_+ for the finite-support yields y_1..y_N."""
    with DEFAULT_PRECISION.workprec():
        out = []
        for x in mu:
            x = to_mpf(x)
            out.append(mpmath.fsum(x ** n / mpmath.factorial(n) * to_mpf(v) for n, v in enumerate(y, start=1)))
        return out


def _golden_report():
    return analyze(synthesize_record(REFERENCE, REFERENCE_MU))


class TestConstraintSystem(unittest.TestCase):
    def test_solve_matches_residual(self) -> None:
        rng = random.Random(1)
        for size in range(1, 5):
            mu = _random_mu(rng, size)
            rhs = [Fraction(rng.randint(1, 999), 1000) for _ in range(size)]
            with DEFAULT_PRECISION.workprec():
                system = ConstraintSystem(mu)
                y = system.solve(rhs)
                self.assertLess(system.residual(y, rhs), mpmath.mpf("1e-60"))

    def test_rejects_wrong_length(self) -> None:
        with DEFAULT_PRECISION.workprec():
            system = ConstraintSystem(REFERENCE_MU)
            with self.assertRaises(DomainError):
                system.solve(["1", "2"])

    def test_poisson_tail(self) -> None:
        with DEFAULT_PRECISION.workprec():
            self.assertTrue(_close(poisson_tail("0.5", 0), mpmath.expm1(to_mpf("0.5"))))
            expected = mpmath.exp(to_mpf("0.3")) - 1 - to_mpf("0.3") - to_mpf("0.3") ** 2 / 2
            self.assertTrue(_close(poisson_tail("0.3", 2), expected))


class TestXConfiguration(unittest.TestCase):
    def test_lagrange_agrees_with_cramer(self) -> None:
        rng = random.Random(2)
        for size in range(1, 5):
            mu = _random_mu(rng, size)
            rhs = [Fraction(rng.randint(1, 999), 1000) for _ in range(size)]
            x = compute_x(rhs, mu)
            self.assertLess(x.x1_crosscheck, mpmath.mpf("1e-20"))
            with DEFAULT_PRECISION.workprec():
                direct = ConstraintSystem(mu).solve(rhs)[0]
            self.assertTrue(_close(x1_lagrange(rhs, mu), direct, "1e-40"))

    def test_recovers_finite_support(self) -> None:
        y = [Fraction(3, 10), Fraction(1, 2), Fraction(7, 10)]
        x = compute_x(_rhs_for(y, REFERENCE_MU), REFERENCE_MU)
        for n in range(1, 4):
            self.assertTrue(_close(x[n], y[n - 1], "1e-40"))
        self.assertEqual(x[4], 0)
        with self.assertRaises(IndexError):
            x[0]


class TestWVectors(unittest.TestCase):
    def test_kernel_identity(self) -> None:
        rng = random.Random(3)
        for size in range(1, 5):
            mu = _random_mu(rng, size)
            for m in range(size + 1, size + 26):
                w = w_vector(m, mu)
                with DEFAULT_PRECISION.workprec():
                    for x in mu:
                        x = to_mpf(x)
                        total = mpmath.fsum(x ** n / mpmath.factorial(n) * w[n] for n in range(1, size + 1))
                        total += x ** m / mpmath.factorial(m)
                        self.assertLessEqual(abs(total), mpmath.mpf("1e-25") * mpmath.exp(x))

    def test_two_intensity_example(self) -> None:
        a, b = Fraction(1, 10), Fraction(3, 10)
        w = w_vector(3, [a, b])
        self.assertTrue(_close(w[1], a * b / 6))
        self.assertTrue(_close(w[2], -(a + b) / 3))
        self.assertEqual(w[3], 1)
        self.assertEqual(w[4], 0)

    def test_matches_determinant_definition(self) -> None:
        rng = random.Random(4)
        for size in range(1, 5):
            mu = _random_mu(rng, size)
            for m in range(size + 1, size + 7):
                w = w_vector(m, mu)
                raw = gvm_vector(m, mu)
                with DEFAULT_PRECISION.workprec():
                    for n in range(1, size + 1):
                        self.assertTrue(_close(raw[n] / raw[m], w[n], "1e-30"))

    def test_sign_alternates(self) -> None:
        w = w_vector(6, REFERENCE_MU)
        self.assertLess(w[3], 0)
        self.assertGreater(w[2], 0)
        self.assertLess(w[1], 0)

    def test_rejects_small_index(self) -> None:
        with self.assertRaises(DomainError):
            w_vector(3, REFERENCE_MU)
        with self.assertRaises(DomainError):
            gvm_vector(2, REFERENCE_MU)

    def test_difference_expansion(self) -> None:
        rng = random.Random(5)
        for size in range(1, 5):
            mu = _random_mu(rng, size)
            y = [Fraction(rng.randint(0, 1000), 1000) for _ in range(size + 8)]
            x = compute_x(_rhs_for(y, mu), mu)
            diff = difference_expansion(y, mu)
            for n in range(1, size + 1):
                with DEFAULT_PRECISION.workprec():
                    self.assertLess(abs(to_mpf(y[n - 1]) - x[n] - diff[n - 1]), mpmath.mpf("1e-40"))


class TestSearch(unittest.TestCase):
    def test_l0_cap_example(self) -> None:
        self.assertEqual(l0_cap("2.997e-3", 3), 8)

    def test_l0_cap_falls_back_to_model(self) -> None:
        p = ChannelParams(A="1", B="0", eta="1e-3")
        self.assertEqual(l0_cap(None, 3, p=p), 8)
        self.assertEqual(l0_cap("2.997e-3", 3, mu_max="1.5", user_cap=50), 50)

    def test_golden_search(self) -> None:
        z = _golden_report().z
        self.assertEqual(z.branch, BRANCH_ROOT)
        self.assertEqual(z.L0, 4)
        self.assertTrue(abs(float(z.a0) - 0.07384) < 5e-4)

    def test_root_matches_bisection(self) -> None:
        record = synthesize_record(REFERENCE, REFERENCE_MU)
        rhs = to_constraint_rhs(record)
        search = find_l0_a0(rhs, REFERENCE_MU)
        with DEFAULT_PRECISION.workprec():
            lo, hi = mpmath.mpf(0), mpmath.mpf(1)
            self.assertGreaterEqual(z_vector(search.L0, lo, rhs, REFERENCE_MU)[-1], 0)
            self.assertLess(z_vector(search.L0, hi, rhs, REFERENCE_MU)[-1], 0)
            for _ in range(120):
                mid = (lo + hi) / 2
                if z_vector(search.L0, mid, rhs, REFERENCE_MU)[-1] >= 0:
                    lo = mid
                else:
                    hi = mid
            self.assertLess(abs(lo - search.a0), mpmath.mpf("1e-30"))
            self.assertLess(abs(z_vector(search.L0, search.a0, rhs, REFERENCE_MU)[-1]), mpmath.mpf("1e-40"))

    def test_tail_continuity(self) -> None:
        rhs = to_constraint_rhs(synthesize_record(REFERENCE, REFERENCE_MU))
        for L in range(4, 9):
            a = z_vector(L, 0, rhs, REFERENCE_MU)
            b = z_vector(L + 1, 1, rhs, REFERENCE_MU)
            for u, v in zip(a, b):
                self.assertTrue(_close(u, v, "1e-40"))

    def test_g_function(self) -> None:
        with DEFAULT_PRECISION.workprec():
            q = synth_qplus("0.2", REFERENCE)
            expected = mpmath.exp(to_mpf("0.2")) * q - poisson_tail("0.2", 4) - to_mpf("0.5") * to_mpf("0.2") ** 4 / 24
            self.assertTrue(_close(g_function("0.2", 4, "0.5", q), expected))

    def test_saturated(self) -> None:
        mu = [Fraction(1, 10), Fraction(3, 10)]
        with DEFAULT_PRECISION.workprec():
            rhs = [mpmath.expm1(to_mpf(x)) for x in mu]
        z = compute_z(rhs, mu)
        self.assertEqual(z.L0, 3)
        self.assertEqual(z.branch, BRANCH_SATURATED)
        self.assertEqual(z.a0, 1)
        for n in (1, 2, 3, 10):
            self.assertTrue(_close(z[n], 1, "1e-30"))

    def test_pinned(self) -> None:
        mu = [Fraction(1, 10), Fraction(3, 10)]
        rhs = _rhs_for([Fraction(1, 2), 0], mu)
        z = compute_z(rhs, mu)
        self.assertEqual(z.branch, BRANCH_PINNED)
        self.assertIsNone(z.L0)
        self.assertTrue(_close(z[1], "0.5"))
        self.assertEqual(z[5], 0)

    def test_negative_top_entry_is_infeasible(self) -> None:
        mu = [Fraction(1, 10), Fraction(3, 10)]
        rhs = _rhs_for([Fraction(1, 2), Fraction(-1, 10)], mu)
        with self.assertRaises(InfeasibleData):
            compute_z(rhs, mu)

    def test_cap_exceeded(self) -> None:
        mu = [Fraction(1, 10), Fraction(2, 10)]
        rhs = _rhs_for([0, Fraction(1, 10 ** 30)], mu)
        with self.assertRaises(CapExceeded) as ctx:
            find_l0_a0(rhs, mu, cap=10)
        self.assertEqual(ctx.exception.fields["cap"], 10)

    def test_cap_below_minimum(self) -> None:
        rhs = to_constraint_rhs(synthesize_record(REFERENCE, REFERENCE_MU))
        with self.assertRaises(DomainError):
            find_l0_a0(rhs, REFERENCE_MU, cap=3)


class TestIntervals(unittest.TestCase):
    def test_golden_values(self) -> None:
        report = _golden_report()
        self.assertTrue(report.exact)
        self.assertFalse(report.infeasible)
        self.assertTrue(abs(float(report.x[1]) - 1.003e-2) < 1e-5)
        with DEFAULT_PRECISION.workprec():
            self.assertLess(abs(report.x[1] - to_mpf("1.002397395e-2")), mpmath.mpf("1e-10"))
            self.assertLess(abs(report.z[1] - to_mpf("0.995285904e-2")), mpmath.mpf("1e-10"))
            self.assertLess(abs(report.z.a0 - to_mpf("0.0738359533")), mpmath.mpf("1e-8"))
        # The published Z_1 of 0.993e-2 sits about 2.3e-5 below the computed value.
        self.assertTrue(2e-5 < float(report.z[1]) - 0.993e-2 < 3e-5)
        first = report.interval(1)
        self.assertTrue(first.contains(yield_q(1, REFERENCE)))
        self.assertLess(first.hi - first.lo, mpmath.mpf("1e-3"))

    def test_parity(self) -> None:
        report = _golden_report()
        self.assertEqual((report.interval(1).lo_from, report.interval(1).hi_from), ("Z", "X"))
        self.assertEqual((report.interval(2).lo_from, report.interval(2).hi_from), ("X", "Z"))
        self.assertEqual((report.interval(3).lo_from, report.interval(3).hi_from), ("Z", "X"))
        for interval in report.intervals:
            self.assertLessEqual(interval.lo, interval.hi)

    def test_out_of_range_index(self) -> None:
        report = _golden_report()
        with self.assertRaises(DomainError):
            bound_interval(4, report.x, report.z)

    def test_model_yields_inside_intervals(self) -> None:
        report = _golden_report()
        for n in range(1, 4):
            self.assertTrue(report.interval(n).contains(yield_q(n, REFERENCE), "1e-40"))

    def test_sandwich_random_yields(self) -> None:
        rng = random.Random(6)
        for _ in range(500):
            size = rng.randint(2, 4)
            mu = _random_mu(rng, size, low=50)
            y = [Fraction(rng.randint(0, 1000), 1000) for _ in range(size + rng.randint(1, 8))]
            record = push_forward(y, IntensitySet(tuple(mu), 0))
            report = analyze(record)
            self.assertFalse(report.infeasible)
            for n in range(1, size + 1):
                self.assertTrue(report.interval(n).contains(y[n - 1], "1e-40"), (mu, y, n))

    def test_model_certificates(self) -> None:
        rng = random.Random(7)
        tol = mpmath.mpf("1e-40")
        for _ in range(1000):
            eta = Fraction(rng.randint(1, 1000), 10000)
            p = ChannelParams(
                A=Fraction(rng.randint(1, 100), 100),
                B=eta * Fraction(rng.randint(0, 100), 100),
                eta=eta,
            )
            mu = _random_mu(rng, rng.randint(1, 4), low=50)
            report = analyze(synthesize_record(p, mu))
            checks = report.diagnostics["lemma_checks"]
            self.assertTrue(all(c.ok for c in checks), (p, mu))
            self.assertTrue(report.exact)
            self.assertTrue(report.diagnostics["l0_bound_ok"])
            for v in report.x.values + tuple(report.z[n] for n in range(1, len(mu) + 1)):
                self.assertTrue(-tol <= v <= 1 + tol, (p, mu))

    def test_certificate_when_estimate_is_loose(self) -> None:
        p = ChannelParams(A=Fraction(24, 25), B=Fraction(27, 10000), eta=Fraction(9, 400))
        mu = ("0.216", "0.548", "0.733", "0.956")
        report = analyze(synthesize_record(p, mu))
        checks = report.diagnostics["lemma_checks"]
        self.assertTrue(all(c.ok for c in checks))
        self.assertFalse(checks[3].within_estimate)
        self.assertFalse(any("certificate" in w for w in report.warnings))
        with DEFAULT_PRECISION.workprec():
            self.assertTrue(0 <= report.x[4] <= 1)

    def test_box_violation_gives_bounds_only(self) -> None:
        mu = ("0.15", "0.6")
        rhs = _rhs_for([Fraction(7, 10), 1, 1, 1, 1, 1, 1, 1, 1, 1], mu)
        with DEFAULT_PRECISION.workprec():
            q = [mpmath.exp(-to_mpf(x)) * r for x, r in zip(mu, rhs)]
        report = analyze(MeasurementRecord(IntensitySet(mu, 0), Q=tuple(q)))
        self.assertGreater(report.x[2], 1)
        self.assertFalse(report.exact)
        self.assertFalse(report.infeasible)
        self.assertTrue(any("bounds only" in w for w in report.warnings))
        self.assertTrue(report.interval(2).contains(1, "1e-40"))

    def test_large_intensity_warns(self) -> None:
        report = analyze(synthesize_record(REFERENCE, ("0.2", "0.5", "1.5")))
        self.assertFalse(report.exact)
        self.assertTrue(any("not guaranteed" in w for w in report.warnings))

    def test_error_products(self) -> None:
        record = synthesize_record(REFERENCE, REFERENCE_MU, e_det="0.01")
        report = analyze(record, errors=True)
        self.assertEqual(report.mode, "errors")
        err = ChannelParams.error_model("0.01", "1e-5", "1e-2")
        for n in range(1, 4):
            self.assertTrue(report.interval(n).contains(yield_q(n, err), "1e-40"))


if __name__ == "__main__":
    unittest.main()
