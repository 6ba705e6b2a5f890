"""Read measurement records from CSV or JSON.

CSV: optional ``key=value`` lines (y0, A, B, eta) and ``#`` comments, then a
header naming the columns mu, Q and optionally E, then one row per intensity.

JSON: ``{"y0": ..., "model": {"A": ..., "B": ..., "eta": ...},
"rows": [{"mu": ..., "Q": ..., "E": ...}, ...]}``.

Numbers are kept as decimal strings until they reach mpmath.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .errors import SchemaError, ValidationError
from .model import ChannelParams, IntensitySet, MeasurementRecord, to_constraint_rhs
from .symfunc import DEFAULT_PRECISION, PrecisionConfig, to_mpf

logger = logging.getLogger(__name__)

SIDECAR_KEYS = ("y0", "A", "B", "eta")
MODEL_KEYS = ("A", "B", "eta")
REQUIRED_COLUMNS = ("mu", "Q")
OPTIONAL_COLUMNS = ("E",)


def _number(raw: Any, line: Optional[int], name: str) -> str:
    if isinstance(raw, bool) or raw is None:
        raise SchemaError(f"{name} must be a number", line=line, field=name)
    text = str(raw).strip()
    try:
        to_mpf(text)
    except (ValueError, TypeError):
        raise SchemaError(f"{name}={text!r} is not a number", line=line, field=name)
    return text


def _build_record(
    rows: List[Tuple[int, Dict[str, str]]],
    sidecar: Dict[str, str],
    has_e: bool,
    strict_model: bool,
    precision: PrecisionConfig,
) -> MeasurementRecord:
    if not rows:
        raise SchemaError("no measurement rows", field="rows")

    model = None
    present = [k for k in MODEL_KEYS if k in sidecar]
    if present and len(present) != len(MODEL_KEYS):
        missing = [k for k in MODEL_KEYS if k not in sidecar]
        raise SchemaError(f"model needs A, B and eta; missing {missing}", field=missing[0])
    if present:
        model = ChannelParams(sidecar["A"], sidecar["B"], sidecar["eta"], strict=strict_model)

    if "y0" in sidecar:
        y0: Any = sidecar["y0"]
    elif model is not None:
        y0 = model.B
    else:
        logger.warning("no y0 given and no model to infer it from; assuming y0 = 0")
        y0 = "0"

    mu = tuple(r["mu"] for _, r in rows)
    q = tuple(r["Q"] for _, r in rows)
    e = tuple(r["E"] for _, r in rows) if has_e else None
    intensities = IntensitySet(mu, y0)
    record = MeasurementRecord(intensities=intensities, Q=q, E=e, model=model)
    to_constraint_rhs(record, errors=False, precision=precision)
    if has_e:
        to_constraint_rhs(record, errors=True, precision=precision)
    return record


def parse_csv(text: str, strict_model: bool = True, precision: PrecisionConfig = DEFAULT_PRECISION) -> MeasurementRecord:
    sidecar: Dict[str, str] = {}
    lines = text.splitlines()
    header_at: Optional[int] = None
    for idx, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line and "," not in line:
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in SIDECAR_KEYS:
                raise SchemaError(f"unknown key {key!r}; expected one of {SIDECAR_KEYS}", line=idx, field=key)
            sidecar[key] = _number(value, idx, key)
            continue
        header_at = idx
        break
    if header_at is None:
        raise SchemaError("missing header row with columns mu,Q[,E]")

    reader = csv.reader(io.StringIO("\n".join(lines[header_at - 1:])))
    header = [h.strip() for h in next(reader)]
    for col in REQUIRED_COLUMNS:
        if col not in header:
            raise SchemaError(f"header lacks column {col!r}", line=header_at, field=col)
    unknown = [h for h in header if h not in REQUIRED_COLUMNS + OPTIONAL_COLUMNS]
    if unknown:
        raise SchemaError(f"unknown column {unknown[0]!r}", line=header_at, field=unknown[0])
    has_e = "E" in header

    rows: List[Tuple[int, Dict[str, str]]] = []
    for offset, cells in enumerate(reader, start=1):
        line_no = header_at + offset
        if not cells or all(not c.strip() for c in cells) or cells[0].strip().startswith("#"):
            continue
        if len(cells) != len(header):
            raise SchemaError(f"expected {len(header)} fields, got {len(cells)}", line=line_no)
        row = {h: _number(c, line_no, h) for h, c in zip(header, cells)}
        rows.append((line_no, row))
    return _build_record(rows, sidecar, has_e, strict_model, precision)


def parse_json(text: str, strict_model: bool = True, precision: PrecisionConfig = DEFAULT_PRECISION) -> MeasurementRecord:
    try:
        data = json.loads(text, parse_float=str)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e.msg}", line=e.lineno)
    if not isinstance(data, dict):
        raise SchemaError("top level must be an object")

    sidecar: Dict[str, str] = {}
    if data.get("y0") is not None:
        sidecar["y0"] = _number(data["y0"], None, "y0")
    model = data.get("model")
    if model is not None:
        if not isinstance(model, dict):
            raise SchemaError("model must be an object", field="model")
        for k in MODEL_KEYS:
            if k in model:
                sidecar[k] = _number(model[k], None, f"model.{k}")

    raw_rows = data.get("rows")
    if not isinstance(raw_rows, list):
        raise SchemaError("rows must be a list", field="rows")
    has_e = bool(raw_rows) and all(isinstance(r, dict) and r.get("E") is not None for r in raw_rows)
    rows: List[Tuple[int, Dict[str, str]]] = []
    for i, r in enumerate(raw_rows):
        if not isinstance(r, dict):
            raise SchemaError(f"rows[{i}] must be an object", field=f"rows[{i}]")
        row = {}
        for col in REQUIRED_COLUMNS:
            if col not in r:
                raise SchemaError(f"rows[{i}] lacks {col!r}", field=f"rows[{i}].{col}")
            row[col] = _number(r[col], None, f"rows[{i}].{col}")
        if has_e:
            row["E"] = _number(r["E"], None, f"rows[{i}].E")
        rows.append((i, row))
    return _build_record(rows, sidecar, has_e, strict_model, precision)


def parse_input(
    path: Path,
    strict_model: bool = True,
    precision: PrecisionConfig = DEFAULT_PRECISION,
) -> MeasurementRecord:
    """Read and validate one input file; the format follows the suffix (.json or CSV)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ValidationError(f"cannot read {path}: {e}")
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        return parse_json(text, strict_model, precision)
    return parse_csv(text, strict_model, precision)
