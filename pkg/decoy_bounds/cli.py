import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import mpmath

from . import __version__
from .bounds import analyze
from .config import Settings, load_config, resolve_settings, write_default_config
from .errors import DecoyBoundsError, OracleMismatch, ValidationError
from .ingest import parse_input
from .keyrate import KeyRateInput, key_rate, key_rate_from_bounds, key_rate_printed
from .model import ChannelParams, IntensitySet, push_forward, synthesize_record, yield_q
from .oracle import sample_feasible, verify_report
from .report import num, render, report_to_dict, verification_to_dict, write_plot_data
from .symfunc import to_mpf

logger = logging.getLogger(__name__)

MODES = ("yields", "errors", "both")

GOLDEN_PARAMS = {"A": "1", "B": "1e-5", "eta": "1e-2"}
GOLDEN_MU = ("0.07", "0.2", "0.5")
# name: (expected, tolerance, published figure)
GOLDEN_EXPECT = {
    "q_1": ("1.001e-2", "1e-12", "1.001e-2"),
    "X_1": ("1.002397395e-2", "1e-10", "1.003e-2"),
    "Z_1": ("0.995285904e-2", "1e-10", "0.993e-2"),
}


def _settings(args: argparse.Namespace) -> Settings:
    return resolve_settings(
        load_config(),
        {
            "significand_bits": getattr(args, "precision_bits", None),
            "cap": getattr(args, "cap", None),
            "n_trunc": getattr(args, "oracle_n", None),
            "output_format": getattr(args, "format", None),
        },
    )


def _emit(payload: Any, args: argparse.Namespace, fmt: str) -> None:
    text = render(payload, fmt) if isinstance(payload, dict) else json.dumps(payload, indent=2)
    out = getattr(args, "output", None)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n", encoding="utf-8")
        return
    print(text)


def _error_payload(e: DecoyBoundsError) -> Dict[str, Any]:
    return {"error": e.to_dict()}


# ── Pipeline ──

def run_bounds(
    record,
    settings: Settings,
    mode: str = "yields",
    verify: bool = False,
    verbose: bool = False,
    plot_dir: Optional[str] = None,
) -> Tuple[Dict[str, Any], int]:
    """Analyze one record and return the serialized report with its exit code."""
    prec = settings.precision()
    yields = analyze(record, prec, settings.cap) if mode in ("yields", "both") else None
    errs = analyze(record, prec, settings.cap, errors=True) if mode in ("errors", "both") else None
    primary = yields if yields is not None else errs

    rc = 0
    failures: List[Dict[str, Any]] = []
    kr = None
    if yields is not None and errs is not None:
        try:
            kr = key_rate_from_bounds(yields, errs, f=settings.f_ec, precision=prec)
        except DecoyBoundsError as e:
            failures.append(e.to_dict())

    verification = verify_report(primary, prec, settings.n_trunc, settings.tolerance) if verify else None
    payload = report_to_dict(primary, verification, kr, verbose)
    if verification is not None and not verification.ok:
        failures.append(
            OracleMismatch(f"oracle disagrees with {primary.mode} bounds beyond {settings.tolerance}").to_dict()
        )
        rc = OracleMismatch.exit_code

    if yields is not None and errs is not None:
        err_verification = verify_report(errs, prec, settings.n_trunc, settings.tolerance) if verify else None
        nested = report_to_dict(errs, err_verification, None, verbose)
        payload["error_products"] = {
            k: nested[k] for k in ("mode", "x_config", "z_config", "intervals", "exact", "infeasible", "oracle", "warnings")
        }
        if err_verification is not None and not err_verification.ok:
            failures.append(OracleMismatch("oracle disagrees with error-product bounds").to_dict())
            rc = OracleMismatch.exit_code

    if any(r is not None and r.infeasible for r in (yields, errs)) and rc == 0:
        rc = 3

    if plot_dir:
        for r in (yields, errs):
            if r is not None:
                write_plot_data(r, plot_dir)

    payload["errors"] = failures
    return payload, rc


def cmd_init(args: argparse.Namespace) -> int:
    path = write_default_config(overwrite=args.overwrite)
    print(str(path))
    return 0


def cmd_bounds(args: argparse.Namespace) -> int:
    settings = _settings(args)
    verify = bool(getattr(args, "verify", False))
    mode = getattr(args, "mode", "yields")
    inputs = args.input or []
    if not inputs:
        raise ValidationError("at least one --input is required")

    results = []
    rc = 0
    # mpmath precision is process-wide, so files are handled one after another.
    for path in inputs:
        try:
            record = parse_input(Path(path), strict_model=not args.lenient_model, precision=settings.precision())
            payload, file_rc = run_bounds(record, settings, mode, verify, args.verbose, args.emit_plot_data)
        except DecoyBoundsError as e:
            if len(inputs) == 1:
                raise
            payload, file_rc = {"input": path, "errors": [e.to_dict()]}, e.exit_code
        payload["input"] = path
        results.append(payload)
        if file_rc and not rc:
            rc = file_rc

    if len(results) == 1:
        _emit(results[0], args, settings.output_format)
    else:
        _emit({"reports": results}, args, "json")
    return rc


def cmd_verify(args: argparse.Namespace) -> int:
    args.verify = True
    return cmd_bounds(args)


def _synth_record(args: argparse.Namespace, settings: Settings):
    prec = settings.precision()
    params = ChannelParams(args.A, args.B, args.eta, strict=not args.lenient_model)
    if args.random_yields:
        with prec.workprec():
            y0 = to_mpf(args.y0) if args.y0 is not None else yield_q(0, params, prec)
        intensities = IntensitySet(tuple(args.mu), y0)
        sample = sample_feasible(intensities, args.support, 1, seed=args.seed, precision=prec)[0]
        return push_forward(sample.y, intensities, precision=prec)
    return synthesize_record(params, args.mu, y0=args.y0, e_det=args.e_det, p_dark=args.p_dark, precision=prec)


def record_to_input(record) -> Dict[str, Any]:
    """Canonical JSON input for a record."""
    rows = []
    for i, mu in enumerate(record.intensities.mu):
        row = {"mu": num(mu), "Q": num(record.Q[i])}
        if record.E is not None:
            row["E"] = num(record.E[i])
        rows.append(row)
    out: Dict[str, Any] = {"y0": num(record.intensities.y0), "rows": rows}
    if record.model is not None:
        out["model"] = {k: num(v) for k, v in record.model.to_dict().items()}
    return out


def cmd_synth(args: argparse.Namespace) -> int:
    settings = _settings(args)
    with settings.precision().workprec():
        record = _synth_record(args, settings)
        if not args.bounds:
            _emit(record_to_input(record), args, "json")
            return 0
        mode = args.mode if record.E is not None else "yields"
        payload, rc = run_bounds(record, settings, mode, args.verify, args.verbose, args.emit_plot_data)
    _emit(payload, args, settings.output_format)
    return rc


def cmd_keyrate(args: argparse.Namespace) -> int:
    settings = _settings(args)
    prec = settings.precision()
    if args.input:
        record = parse_input(Path(args.input[0]), strict_model=not args.lenient_model, precision=prec)
        yields = analyze(record, prec, settings.cap)
        errs = analyze(record, prec, settings.cap, errors=True)
        result = key_rate_from_bounds(yields, errs, args.signal_index, f=args.f or settings.f_ec, precision=prec)
        payload = {
            "rate": num(result.rate),
            "signal_index": result.signal_index,
            "e1_upper": num(result.inputs.e1),
            "Q1": num(result.inputs.Q1),
        }
        if args.verbose:
            payload["rate_printed_form"] = num(result.rate_printed)
        _emit(payload, args, "json")
        return 0

    missing = [k for k in ("Q", "E", "Q0", "Q1", "e1") if getattr(args, k) is None]
    if missing:
        raise ValidationError(f"keyrate needs --input or all of --Q --E --Q0 --Q1 --e1 (missing {missing})")
    inp = KeyRateInput(Q=args.Q, E=args.E, Q0=args.Q0, Q1=args.Q1, e1=args.e1, f=args.f or settings.f_ec)
    payload = {"rate": num(key_rate(inp, prec))}
    if args.verbose:
        payload["rate_printed_form"] = num(key_rate_printed(inp, prec))
    _emit(payload, args, "json")
    return 0


def run_selftest(settings: Settings) -> Dict[str, Any]:
    """Reference example: A=1, eta=1e-2, B=1e-5, mu=(0.07, 0.2, 0.5)."""
    prec = settings.precision()
    params = ChannelParams(**GOLDEN_PARAMS)
    record = synthesize_record(params, GOLDEN_MU, precision=prec)
    report = analyze(record, prec, settings.cap)
    verification = verify_report(report, prec, settings.n_trunc, settings.tolerance)
    with prec.workprec():
        observed = {
            "q_1": yield_q(1, params, prec),
            "X_1": report.x[1],
            "Z_1": report.z[1],
        }
        checks = []
        for name, (expected, tol, published) in GOLDEN_EXPECT.items():
            ok = abs(observed[name] - to_mpf(expected)) <= to_mpf(tol)
            checks.append(
                {
                    "name": name,
                    "value": num(observed[name]),
                    "expected": expected,
                    "tolerance": tol,
                    "published": published,
                    "published_delta": mpmath.nstr(observed[name] - to_mpf(published), 6),
                    "ok": bool(ok),
                }
            )
        spread = (report.x[1] - report.z[1]) / observed["q_1"]
        checks.append({"name": "relative_width_y1", "value": mpmath.nstr(spread, 6), "expected": "< 0.01", "ok": bool(spread < mpmath.mpf("0.01"))})
    return {
        "ok": all(c["ok"] for c in checks) and verification.ok and report.exact,
        "checks": checks,
        "L0": report.z.L0,
        "a0": num(report.z.a0),
        "oracle": verification_to_dict(verification),
    }


def cmd_selftest(args: argparse.Namespace) -> int:
    settings = _settings(args)
    payload = run_selftest(settings)
    _emit(payload, args, "json")
    return 0 if payload["ok"] else OracleMismatch.exit_code


# ── Parser ──

def _common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--precision-bits", type=int, default=None, help="mpmath significand bits (>= 64)")
    sp.add_argument("--cap", type=int, default=None, help="(L0, a0) search cap")
    sp.add_argument("--oracle-n", type=int, default=None, help="LP truncation order for verification")
    sp.add_argument("--format", choices=["json", "csv", "text"], default=None, help="Report format")
    sp.add_argument("--output", default=None, help="Write the report to this file instead of stdout")
    sp.add_argument("--verbose", action="store_true", help="Debug logging and diagnostics in the report")
    sp.add_argument("--lenient-model", action="store_true", help="Accept model parameters outside the model domain")


def _pipeline(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--mode", choices=MODES, default="yields", help="Bound yields, error products, or both")
    sp.add_argument("--verify", action="store_true", help="Check the bounds against the truncated LP")
    sp.add_argument("--emit-plot-data", default=None, metavar="DIR", help="Write (n, lo, hi) and (mu, Q) CSV tables")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="decoy-bounds",
        description=f"decoy-bounds {__version__} - exact decoy-state yield bounds, LP verification and key rates",
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("init", help="Create ~/.decoy_bounds/config.json with defaults")
    sp.add_argument("--overwrite", action="store_true", help="Overwrite existing config")
    sp.set_defaults(func=cmd_init, verbose=False)

    sp = sub.add_parser("bounds", help="Bound per-photon-number yields from measured data")
    sp.add_argument("--input", action="append", default=[], help="CSV or JSON input (repeatable)")
    _common(sp)
    _pipeline(sp)
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("verify", help="Bounds plus truncated-LP verification")
    sp.add_argument("--input", action="append", default=[], help="CSV or JSON input (repeatable)")
    _common(sp)
    _pipeline(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("synth", help="Synthesize exact model data (or data from random yields)")
    sp.add_argument("--A", default="1", help="Model gain A")
    sp.add_argument("--B", default="1e-5", help="Model offset B")
    sp.add_argument("--eta", default="1e-2", help="Channel transmission eta")
    sp.add_argument("--mu", nargs="+", default=list(GOLDEN_MU), help="Intensities, increasing")
    sp.add_argument("--y0", default=None, help="Vacuum yield (default: B)")
    sp.add_argument("--e-det", default=None, help="Detector error rate; adds E(mu) columns")
    sp.add_argument("--p-dark", default=None, help="Dark count rate for the error model (default: B)")
    sp.add_argument("--random-yields", action="store_true", help="Use random finite-support yields instead of the model")
    sp.add_argument("--support", type=int, default=8, help="Support size N for --random-yields")
    sp.add_argument("--seed", type=int, default=None, help="Seed for --random-yields")
    sp.add_argument("--bounds", action="store_true", help="Analyze the synthesized data instead of printing it")
    _common(sp)
    _pipeline(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("keyrate", help="Secure key rate from data or from explicit rates")
    sp.add_argument("--input", action="append", default=[], help="CSV or JSON input with E(mu)")
    sp.add_argument("--signal-index", type=int, default=None, help="Signal intensity index (default: largest)")
    sp.add_argument("--Q", default=None)
    sp.add_argument("--E", default=None)
    sp.add_argument("--Q0", default=None)
    sp.add_argument("--Q1", default=None)
    sp.add_argument("--e1", default=None)
    sp.add_argument("--f", default=None, help="Error-correction inefficiency (default from config)")
    _common(sp)
    sp.set_defaults(func=cmd_keyrate)

    sp = sub.add_parser("selftest", help="Run the reference three-intensity example")
    _common(sp)
    sp.set_defaults(func=cmd_selftest)
    return p


def main(argv: Optional[List[str]] = None) -> None:
    p = build_parser()
    args = p.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        rc = args.func(args)
    except DecoyBoundsError as e:
        print(json.dumps(_error_payload(e)), file=sys.stderr)
        rc = e.exit_code
    raise SystemExit(rc)


if __name__ == "__main__":
    main()
