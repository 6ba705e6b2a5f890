import csv
import io
import json
import tempfile
import unittest
from pathlib import Path

import mpmath

from decoy_bounds.bounds import analyze
from decoy_bounds.keyrate import key_rate_from_bounds
from decoy_bounds.model import ChannelParams, synthesize_record
from decoy_bounds.oracle import verify_report
from decoy_bounds.report import INTERVAL_FIELDS, num, render, report_to_dict, write_plot_data

REFERENCE = ChannelParams(A="1", B="1e-5", eta="1e-2")
REFERENCE_MU = ("0.07", "0.2", "0.5")


class TestNum(unittest.TestCase):
    def test_conversions(self) -> None:
        self.assertEqual(num("0.07"), "0.07")
        self.assertEqual(num(4), 4)
        self.assertIs(num(True), True)
        self.assertIsNone(num(None))
        self.assertEqual(num(0.5), "0.5")
        with mpmath.workprec(256):
            third = mpmath.mpf(1) / 3
        self.assertEqual(num(third), "0." + "3" * 30)


class TestReportToDict(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        record = synthesize_record(REFERENCE, REFERENCE_MU, e_det="0.01")
        cls.yields = analyze(record)
        cls.errors = analyze(record, errors=True)

    def test_shape(self) -> None:
        payload = report_to_dict(self.yields)
        self.assertEqual(payload["mode"], "yields")
        self.assertEqual(payload["intensities"], list(REFERENCE_MU))
        self.assertEqual(payload["z_config"]["L0"], 4)
        self.assertEqual(payload["z_config"]["branch"], "root")
        self.assertEqual([i["n"] for i in payload["intervals"]], [1, 2, 3])
        self.assertTrue(payload["exact"])
        self.assertIsNone(payload["oracle"])
        self.assertIsNone(payload["key_rate"])
        self.assertEqual(payload["errors"], [])
        self.assertNotIn("diagnostics", payload)

    def test_json_round_trip(self) -> None:
        kr = key_rate_from_bounds(self.yields, self.errors)
        payload = report_to_dict(self.yields, verify_report(self.yields), kr, verbose=True)
        self.assertEqual(json.loads(render(payload, "json")), payload)
        self.assertTrue(payload["oracle"]["ok"])
        self.assertIn("rate_printed_form", payload["key_rate"])
        self.assertEqual(len(payload["rhs"]), 3)
        self.assertEqual(len(payload["diagnostics"]["lemma_checks"]), 3)
        self.assertEqual(payload["diagnostics"]["search_path"][0]["L"], 4)

    def test_interval_strings_parse_back(self) -> None:
        payload = report_to_dict(self.yields)
        with mpmath.workprec(256):
            lo = mpmath.mpf(payload["intervals"][0]["lo"])
            self.assertLess(abs(lo - self.yields.interval(1).lo), mpmath.mpf("1e-29") * abs(lo))


class TestRender(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        record = synthesize_record(REFERENCE, REFERENCE_MU, e_det="0.01")
        cls.payload = report_to_dict(analyze(record))
        nested = report_to_dict(analyze(record, errors=True))
        cls.payload["error_products"] = {k: nested[k] for k in ("mode", "intervals")}

    def test_csv(self) -> None:
        rows = list(csv.DictReader(io.StringIO(render(self.payload, "csv"))))
        self.assertEqual(list(rows[0].keys()), INTERVAL_FIELDS)
        self.assertEqual(len(rows), 6)
        self.assertEqual([r["mode"] for r in rows], ["yields"] * 3 + ["errors"] * 3)

    def test_text(self) -> None:
        text = render(self.payload, "text")
        self.assertIn("intensities: 0.07, 0.2, 0.5", text)
        self.assertIn("L0=4", text)
        self.assertIn("[errors] n=1:", text)


class TestPlotData(unittest.TestCase):
    def test_tables(self) -> None:
        report = analyze(synthesize_record(REFERENCE, REFERENCE_MU))
        with tempfile.TemporaryDirectory() as tmp:
            written = write_plot_data(report, str(Path(tmp) / "plots"))
            self.assertEqual([Path(p).name for p in written], ["intervals_yields.csv", "detection.csv"])
            rows = list(csv.DictReader(io.StringIO(Path(written[0]).read_text(encoding="utf-8"))))
            self.assertEqual([r["n"] for r in rows], ["1", "2", "3"])
            detection = Path(written[1]).read_text(encoding="utf-8").splitlines()
            self.assertEqual(detection[0], "mu,Q")
            self.assertTrue(detection[1].startswith("0.07,"))


if __name__ == "__main__":
    unittest.main()
