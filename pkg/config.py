"""
Configuration management for greenbench

Resolves the emission factor file, the grid region and inference settings.
Priority: command-line flag > environment variable > local greenbench.conf
file > built-in default.

greenbench.conf and the preset files share one flat format:

    # comment
    factor_file=data/emission_factors.csv
    region=test-grid
"""

import dataclasses
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from errors import ConfigError

REPO_DIR = Path(__file__).parent
LOCAL_CONFIG_FILE = REPO_DIR / "greenbench.conf"
DEFAULT_FACTOR_FILE = REPO_DIR / "data" / "emission_factors.csv"
PRESETS_DIR = REPO_DIR / "presets"

FACTOR_FILE_ENV = "GREENBENCH_FACTOR_FILE"
REGION_ENV = "GREENBENCH_REGION"


@dataclass(frozen=True)
class InferenceConfig:
    """
    Sampling and batching settings for one model.

    Defaults follow the most common baseline row (batch 8, 512 tokens,
    temperature 0.7, top-p 0.9, top-k 50, beam 4).
    """
    model_name: str = "llama3.2:1b"
    batch_size: int = 8
    max_tokens: int = 512
    temperature: float = 0.7
    top_p: float = 0.9
    top_k: int = 50
    beam_size: int = 4

    def __post_init__(self):
        if not self.model_name:
            raise ConfigError("model_name must not be empty")
        for name in ("batch_size", "max_tokens", "top_k", "beam_size"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not 0 <= self.temperature < math.inf:
            raise ConfigError(f"temperature must be a finite number >= 0, got {self.temperature}")
        if not 0 < self.top_p <= 1:
            raise ConfigError(f"top_p must be in (0, 1], got {self.top_p}")

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(InferenceConfig)}


def read_key_value_file(path) -> Dict[str, str]:
    """
    Parse a flat key=value file. Blank lines and `#` comments are skipped.

    Raises:
        ConfigError: On a line without `=`, naming the file and line
    """
    values: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip().strip('"')
    return values


def _coerce(key: str, raw: str, source: str) -> Any:
    kind = _FIELD_TYPES[key]
    try:
        if kind in (int, "int"):
            return int(raw)
        if kind in (float, "float"):
            return float(raw)
    except ValueError as e:
        raise ConfigError(f"{source}: {key}={raw!r} is not a valid {getattr(kind, '__name__', kind)}") from e
    return raw


def load_preset(path) -> Dict[str, Any]:
    """
    Read a preset config file into InferenceConfig field values.

    Raises:
        ConfigError: On unknown keys or unparseable values
    """
    values = {}
    for key, raw in read_key_value_file(path).items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}: unknown key '{key}' (expected one of {', '.join(_FIELD_TYPES)})")
        values[key] = _coerce(key, raw, str(path))
    return values


def resolve_preset_path(name_or_path: str) -> Path:
    """A preset file path, or a bare preset name looked up in presets/."""
    candidate = Path(name_or_path)
    if candidate.exists():
        return candidate
    bundled = PRESETS_DIR / f"{name_or_path}.conf"
    if bundled.exists():
        return bundled
    raise ConfigError(f"preset '{name_or_path}' not found (looked for {candidate} and {bundled})")


def resolve_inference_config(
    preset: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> InferenceConfig:
    """
    Build an InferenceConfig. Priority: overrides > preset file > defaults.

    Args:
        preset: Preset file path or bundled preset name
        overrides: Field values from the command line; None values are ignored
    """
    values: Dict[str, Any] = {}
    if preset:
        values.update(load_preset(resolve_preset_path(preset)))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return InferenceConfig(**values)


def _local_setting(key: str, config_file: Path) -> Optional[str]:
    if config_file.exists():
        return read_key_value_file(config_file).get(key) or None
    return None


def get_factor_file(flag_value: Optional[str] = None, config_file: Path = LOCAL_CONFIG_FILE) -> str:
    """
    Get the emission factor file path.

    Priority: flag > GREENBENCH_FACTOR_FILE > greenbench.conf > bundled table.
    """
    if flag_value:
        return flag_value
    env_value = os.environ.get(FACTOR_FILE_ENV)
    if env_value:
        return env_value
    local = _local_setting("factor_file", config_file)
    if local:
        return local
    return str(DEFAULT_FACTOR_FILE)


def get_region(flag_value: Optional[str] = None, config_file: Path = LOCAL_CONFIG_FILE) -> str:
    """
    Get the grid region used for the emission factor lookup.

    Raises:
        ConfigError: If no region is configured anywhere
    """
    if flag_value:
        return flag_value
    env_value = os.environ.get(REGION_ENV)
    if env_value:
        return env_value
    local = _local_setting("region", config_file)
    if local:
        return local
    raise ConfigError(
        "Region not configured! Pass --region, set GREENBENCH_REGION, "
        "or add region=<key> to greenbench.conf"
    )
