import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

from .errors import ValidationError


ENV_HOME = "DECOY_BOUNDS_HOME"
ENV_PRECISION_BITS = "DECOY_BOUNDS_PRECISION_BITS"

OUTPUT_FORMATS = ("json", "csv", "text")

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "precision": {
        "significand_bits": 256,
        "degeneracy_gap": 1e-6,
    },
    "search": {
        "cap": 200,
    },
    "oracle": {
        "n_trunc": 40,
        "tolerance": 1e-10,
    },
    "keyrate": {
        "f_ec": 1.22,
    },
    "output": {
        "format": "json",
    },
}


def _config_dir() -> Path:
    override = os.environ.get(ENV_HOME, "").strip()
    if override:
        return Path(override)
    return Path.home() / ".decoy_bounds"


def _config_path() -> Path:
    return _config_dir() / "config.json"


def ensure_config_dir() -> Path:
    cfg_dir = _config_dir()
    cfg_dir.mkdir(parents=True, exist_ok=True)
    return cfg_dir


def load_config() -> Dict[str, Any]:
    path = _config_path()
    if not path.exists():
        return {}
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except Exception:
        return {}
    return data if isinstance(data, dict) else {}


def write_default_config(overwrite: bool = False) -> Path:
    cfg_dir = ensure_config_dir()
    path = cfg_dir / "config.json"
    if path.exists() and not overwrite:
        return path
    path.write_text(json.dumps(DEFAULTS, indent=2) + "\n", encoding="utf-8")
    return path


def cfg_get(cfg: Dict[str, Any], *path: str, default: Any = None) -> Any:
    cur: Any = cfg
    for p in path:
        if not isinstance(cur, dict):
            return default
        cur = cur.get(p)
    return default if cur is None else cur


# ── Resolved settings ──

@dataclass(frozen=True)
class Settings:
    significand_bits: int = 256
    degeneracy_gap: float = 1e-6
    cap: int = 200
    n_trunc: int = 40
    tolerance: float = 1e-10
    f_ec: float = 1.22
    output_format: str = "json"

    def __post_init__(self) -> None:
        if self.significand_bits < 64:
            raise ValidationError(f"precision must be >= 64 bits, got {self.significand_bits}")
        if self.cap < 2:
            raise ValidationError(f"search cap must be >= 2, got {self.cap}")
        if self.n_trunc < 1:
            raise ValidationError(f"oracle truncation must be >= 1, got {self.n_trunc}")
        if self.f_ec < 1:
            raise ValidationError(f"error-correction inefficiency must be >= 1, got {self.f_ec}")
        if self.output_format not in OUTPUT_FORMATS:
            raise ValidationError(f"output format must be one of {OUTPUT_FORMATS}, got {self.output_format!r}")

    def precision(self):
        from .symfunc import PrecisionConfig

        return PrecisionConfig(self.significand_bits, self.degeneracy_gap)


def _env_bits() -> Optional[int]:
    raw = os.environ.get(ENV_PRECISION_BITS, "").strip()
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"{ENV_PRECISION_BITS} must be an integer, got {raw!r}")


def resolve_settings(
    cfg: Optional[Dict[str, Any]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> Settings:
    """Merge built-in defaults, the config file, the environment and CLI overrides."""
    cfg = load_config() if cfg is None else cfg
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}

    def _pick(section: str, key: str) -> Any:
        return cfg_get(cfg, section, key, default=DEFAULTS[section][key])

    bits = _pick("precision", "significand_bits")
    env_bits = _env_bits()
    if env_bits is not None:
        bits = env_bits

    values = {
        "significand_bits": int(bits),
        "degeneracy_gap": float(_pick("precision", "degeneracy_gap")),
        "cap": int(_pick("search", "cap")),
        "n_trunc": int(_pick("oracle", "n_trunc")),
        "tolerance": float(_pick("oracle", "tolerance")),
        "f_ec": float(_pick("keyrate", "f_ec")),
        "output_format": str(_pick("output", "format")),
    }
    values.update(overrides)
    return Settings(**values)
