import os
from pathlib import Path
from typing import Dict, Mapping, Optional, Union

from dotenv import load_dotenv

load_dotenv()

if os.getenv("VIBRO_WORKERS") and not os.getenv("VIBRO_WORKERS", "").isdigit():
    raise ValueError("VIBRO_WORKERS must be a positive integer in .env file")

appConfig = {
    "log_level": os.getenv("LOG_LEVEL", "INFO"),
    "log_dir": os.getenv("LOG_DIR", "logs"),
    "default_config_path": os.getenv("VIBRO_CONFIG"),
    "workers": int(os.getenv("VIBRO_WORKERS") or (os.cpu_count() or 1)),
}


def parse_flat_config(text: str, source: str = "<string>") -> Dict[str, str]:
    """
    Parse `key = value` lines. Blank lines and `#` comments are skipped,
    keys are lower-cased, values stay strings (pydantic coerces them later).
    """
    values: Dict[str, str] = {}
    for line_number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{line_number}: expected 'key = value', got {raw_line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ValueError(f"{source}:{line_number}: empty key")
        if key.lower() in values:
            raise ValueError(f"{source}:{line_number}: duplicate key {key!r}")
        values[key.lower()] = value
    return values


def load_flat_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, object]] = None,
) -> Dict[str, object]:
    """
    Resolve experiment parameters: file values first, then CLI overrides (flags win).
    Falls back to VIBRO_CONFIG when no path is given.
    """
    path = path or appConfig["default_config_path"]
    merged: Dict[str, object] = {}
    if path:
        config_path = Path(path)
        try:
            text = config_path.read_text(encoding="ascii")
        except OSError as e:
            raise OSError(f"Failed to read config file {config_path}: {e}") from e
        merged.update(parse_flat_config(text, source=str(config_path)))
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key.lower()] = value
    return merged


def dump_flat_config(values: Mapping[str, object]) -> str:
    lines = []
    for key in sorted(values):
        value = values[key]
        if value is None:
            continue
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
