"""Serialize bounds reports as JSON, CSV or text, and export plot tables."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Dict, List, Optional

import mpmath

from .bounds import BoundsReport, LemmaCheck
from .keyrate import KeyRateResult
from .oracle import Verification

DIGITS = 30

INTERVAL_FIELDS = ["mode", "n", "lo", "hi", "exact", "lo_from", "hi_from"]


def num(value: Any) -> Any:
    """Decimal string with DIGITS significant digits.

    Input strings are returned as given; ints and bools pass through.
    """
    if isinstance(value, mpmath.mpf):
        return mpmath.nstr(value, DIGITS)
    if isinstance(value, float):
        return repr(value)
    return value


def _nums(values) -> List[Any]:
    return [num(v) for v in values]


def _diagnostics(diag: Dict[str, Any]) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for key, value in diag.items():
        if key == "search_path":
            out[key] = [{"L": L, "z_M": num(v)} for L, v in value]
        elif key == "lemma_checks":
            out[key] = [_lemma(c) for c in value]
        else:
            out[key] = num(value)
    return out


def _lemma(check: LemmaCheck) -> Dict[str, Any]:
    return {
        "n": check.n,
        "excess": num(check.excess),
        "bound": num(check.excess_bound),
        "within_estimate": check.within_estimate,
        "x_in_box": check.x_in_box,
        "ok": check.ok,
    }


def verification_to_dict(verification: Verification) -> Dict[str, Any]:
    return {
        "n_trunc": verification.n_trunc,
        "ok": verification.ok,
        "max_delta": num(verification.max_delta),
        "deltas": [
            {
                "n": c.n,
                "lp_min": num(c.lp_min),
                "lp_max": num(c.lp_max),
                "delta_lo": num(c.delta_lo),
                "delta_hi": num(c.delta_hi),
                "ok": c.ok,
            }
            for c in verification.checks
        ],
    }


def key_rate_to_dict(result: KeyRateResult, verbose: bool = False) -> Dict[str, Any]:
    inp = result.inputs
    out = {
        "rate": num(result.rate),
        "signal_index": result.signal_index,
        "Q": num(inp.Q),
        "E": num(inp.E),
        "Q0": num(inp.Q0),
        "Q1": num(inp.Q1),
        "e1_upper": num(inp.e1),
        "f": num(inp.f),
    }
    if verbose:
        out["rate_printed_form"] = num(result.rate_printed)
    return out


def report_to_dict(
    report: BoundsReport,
    verification: Optional[Verification] = None,
    key_rate: Optional[KeyRateResult] = None,
    verbose: bool = False,
) -> Dict[str, Any]:
    record = report.record
    model = record.model
    out: Dict[str, Any] = {
        "mode": report.mode,
        "intensities": _nums(record.intensities.mu),
        "y0": num(record.intensities.y0),
        "model": {k: num(v) for k, v in model.to_dict().items()} if model is not None else None,
        "x_config": {"values": _nums(report.x.values)},
        "z_config": {
            "values": _nums(report.z.values),
            "L0": report.z.L0,
            "a0": num(report.z.a0),
            "branch": report.z.branch,
        },
        "intervals": [
            {
                "n": i.n,
                "lo": num(i.lo),
                "hi": num(i.hi),
                "exact": i.exact,
                "lo_from": i.lo_from,
                "hi_from": i.hi_from,
            }
            for i in report.intervals
        ],
        "exact": report.exact,
        "infeasible": report.infeasible,
        "oracle": verification_to_dict(verification) if verification is not None else None,
        "key_rate": key_rate_to_dict(key_rate, verbose) if key_rate is not None else None,
        "warnings": list(report.warnings) + list(record.notes),
        "errors": [],
    }
    if verbose:
        out["diagnostics"] = _diagnostics(report.diagnostics)
        out["rhs"] = _nums(report.rhs)
    return out


# ── Rendering ──

def _interval_rows(payload: Dict[str, Any]) -> List[Dict[str, Any]]:
    rows = [{"mode": payload.get("mode", ""), **i} for i in payload.get("intervals") or []]
    nested = payload.get("error_products")
    if nested:
        rows.extend({"mode": nested.get("mode", "errors"), **i} for i in nested.get("intervals") or [])
    return rows


def render(payload: Dict[str, Any], fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(payload, indent=2)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=INTERVAL_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in _interval_rows(payload):
            writer.writerow({k: row.get(k, "") for k in INTERVAL_FIELDS})
        return buf.getvalue().rstrip("\n")
    return _render_text(payload)


def _render_text(payload: Dict[str, Any]) -> str:
    lines = [
        f"intensities: {', '.join(payload.get('intensities') or [])}",
        f"y0: {payload.get('y0')}",
    ]
    z = payload.get("z_config") or {}
    lines.append(f"Z tail: L0={z.get('L0')} a0={z.get('a0')} ({z.get('branch')})")
    for row in _interval_rows(payload):
        tag = "exact" if row["exact"] else "bound"
        lines.append(f"[{row['mode']}] n={row['n']}: {row['lo']} <= y <= {row['hi']}  ({tag})")
    kr = payload.get("key_rate")
    if kr:
        lines.append(f"key rate: {kr['rate']}")
    oracle = payload.get("oracle")
    if oracle:
        lines.append(f"oracle (N={oracle['n_trunc']}): {'ok' if oracle['ok'] else 'MISMATCH'}, max delta {oracle['max_delta']}")
    for w in payload.get("warnings") or []:
        lines.append(f"warning: {w}")
    return "\n".join(lines)


def write_plot_data(report: BoundsReport, directory: str) -> List[str]:
    """Write intervals (n, lo, hi) and detection data (mu, Q) as CSV tables."""
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    written = []

    intervals_path = target / f"intervals_{report.mode}.csv"
    with intervals_path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["n", "lo", "hi"])
        writer.writeheader()
        for i in report.intervals:
            writer.writerow({"n": i.n, "lo": num(i.lo), "hi": num(i.hi)})
    written.append(str(intervals_path))

    record = report.record
    detection_path = target / "detection.csv"
    with detection_path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["mu", "Q"])
        writer.writeheader()
        for mu, q in zip(record.intensities.mu, record.Q):
            writer.writerow({"mu": num(mu), "Q": num(q)})
    written.append(str(detection_path))
    return written
