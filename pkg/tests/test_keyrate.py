import unittest
from fractions import Fraction

import mpmath
from hypothesis import given, settings, strategies as st

from decoy_bounds.bounds import analyze
from decoy_bounds.errors import DegenerateYield, DomainError, ValidationError
from decoy_bounds.keyrate import (
    KeyRateInput,
    e1_upper,
    h2,
    key_rate,
    key_rate_from_bounds,
    key_rate_printed,
)
from decoy_bounds.model import ChannelParams, synthesize_record
from decoy_bounds.symfunc import DEFAULT_PRECISION, to_mpf

REFERENCE = ChannelParams(A="1", B="1e-5", eta="1e-2")
REFERENCE_MU = ("0.07", "0.2", "0.5")


def _golden_pair():
    record = synthesize_record(REFERENCE, REFERENCE_MU, e_det="0.01")
    return analyze(record), analyze(record, errors=True)


class TestBinaryEntropy(unittest.TestCase):
    def test_values(self) -> None:
        self.assertEqual(h2(0), 0)
        self.assertEqual(h2(1), 0)
        with DEFAULT_PRECISION.workprec():
            self.assertLess(abs(h2("0.5") - 1), mpmath.mpf("1e-70"))
            self.assertLess(abs(h2("0.25") - mpmath.mpf("0.8112781244591328")), mpmath.mpf("1e-15"))

    def test_domain(self) -> None:
        with self.assertRaises(DomainError):
            h2("-0.1")
        with self.assertRaises(DomainError):
            h2("1.1")

    @settings(deadline=None, max_examples=60)
    @given(st.integers(min_value=0, max_value=1000))
    def test_symmetry(self, k) -> None:
        e = Fraction(k, 1000)
        with DEFAULT_PRECISION.workprec():
            self.assertLess(abs(h2(e) - h2(1 - e)), mpmath.mpf("1e-60"))

    @settings(deadline=None, max_examples=60)
    @given(st.integers(min_value=0, max_value=499))
    def test_increasing_below_half(self, k) -> None:
        self.assertLess(h2(Fraction(k, 1000)), h2(Fraction(k + 1, 1000)))


class TestKeyRate(unittest.TestCase):
    def test_formula(self) -> None:
        inp = KeyRateInput(Q="0.01", E="0.25", Q0="0.001", Q1="0.005", e1="0.25", f="1")
        with DEFAULT_PRECISION.workprec():
            h = h2("0.25")
            expected = -to_mpf("0.01") * h + to_mpf("0.001") + to_mpf("0.005") * (1 - h)
            printed = to_mpf("0.01") * h + to_mpf("0.001") + to_mpf("0.005") * (1 - h)
            self.assertLess(abs(key_rate(inp) - expected), mpmath.mpf("1e-60"))
            self.assertLess(abs(key_rate_printed(inp) - printed), mpmath.mpf("1e-60"))

    def test_no_errors_no_penalty(self) -> None:
        inp = KeyRateInput(Q="0.01", E="0", Q0="0", Q1="0.004", e1="0")
        with DEFAULT_PRECISION.workprec():
            self.assertLess(abs(key_rate(inp) - to_mpf("0.004")), mpmath.mpf("1e-70"))

    def test_input_validation(self) -> None:
        with self.assertRaises(ValidationError):
            KeyRateInput(Q="1.5", E="0", Q0="0", Q1="0", e1="0")
        with self.assertRaises(ValidationError):
            KeyRateInput(Q="0.1", E="0", Q0="0", Q1="0", e1="0.6")
        with self.assertRaises(ValidationError):
            KeyRateInput(Q="0.1", E="0", Q0="0", Q1="0", e1="0.1", f="0.9")

    def test_e1_upper(self) -> None:
        with DEFAULT_PRECISION.workprec():
            self.assertEqual(e1_upper("0.001", "0.01"), to_mpf("0.001") / to_mpf("0.01"))
        self.assertEqual(e1_upper("0.01", "0.01"), to_mpf("0.5"))
        with self.assertRaises(DegenerateYield):
            e1_upper("0.001", 0)


class TestKeyRateFromBounds(unittest.TestCase):
    def test_golden_rate(self) -> None:
        yields, errs = _golden_pair()
        result = key_rate_from_bounds(yields, errs)
        self.assertEqual(result.signal_index, 2)
        self.assertTrue(1e-3 < float(result.rate) < 4e-3)
        self.assertGreater(result.rate_printed, result.rate)
        with DEFAULT_PRECISION.workprec():
            self.assertLess(abs(result.rate / to_mpf("2.2375341e-3") - 1), mpmath.mpf("1e-6"))
            self.assertLess(abs(result.inputs.e1 - to_mpf("0.01056394060")), mpmath.mpf("1e-10"))
            self.assertLess(abs(result.inputs.Q1 - to_mpf("3.01835708e-3")), mpmath.mpf("1e-11"))

    def test_weaker_signal_gives_lower_rate(self) -> None:
        yields, errs = _golden_pair()
        strong = key_rate_from_bounds(yields, errs)
        weak = key_rate_from_bounds(yields, errs, signal_index=0)
        self.assertLess(weak.rate, strong.rate)

    def test_requires_error_rates(self) -> None:
        record = synthesize_record(REFERENCE, REFERENCE_MU)
        report = analyze(record)
        with self.assertRaises(ValidationError):
            key_rate_from_bounds(report, report)

    def test_signal_index_range(self) -> None:
        yields, errs = _golden_pair()
        with self.assertRaises(DomainError):
            key_rate_from_bounds(yields, errs, signal_index=3)


if __name__ == "__main__":
    unittest.main()
