"""Flat ``key = value`` scenario files.

Intensities are written per kilometre and converted to per metre; obstacle
sizes are written as mean half-lengths in metres (``1/mu``).  Example::

    lambda_t_per_km = 4
    lambda_b_per_km = 10
    mean_half_length_m = 2.5
    d1_m = 10
    d2_m = 10
    d_star_m = 1500

A ``d_star_m`` entry takes precedence over the radio triple
``p``/``sigma``/``alpha_los``/``tau``.
"""

from __future__ import annotations

import ast
import configparser
import os
import re
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .model import RadioParams, ScenarioParams

SCENARIO_DIR_ENV = "LOSCOV_SCENARIO_DIR"
SECTION = "scenario"

KNOWN_KEYS = {
    "lambda_t_per_km", "lambda_b_per_km", "lambda_v_per_km", "mean_half_length_m",
    "lane_heights_m", "d1_m", "d2_m", "p", "sigma", "alpha_los", "tau", "d_star_m",
    "v_mps", "vo_mps", "allow_small_offsets",
}
REQUIRED_KEYS = ("lambda_t_per_km", "lambda_b_per_km", "mean_half_length_m", "d1_m", "d2_m")
RADIO_KEYS = ("p", "sigma", "alpha_los", "tau")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry when known."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


def parse_value(raw: str, key: str = "") -> Any:
    text = raw.strip()
    if text.lower() in ("true", "yes", "on"):
        return True
    if text.lower() in ("false", "no", "off"):
        return False
    try:
        value = ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text
    if isinstance(value, tuple):
        value = list(value)
    return value


def read_sections(path) -> dict[str, dict[str, Any]]:
    """Parse a config file into ``{section: {key: value}}``.

    Keys before any section header land in ``scenario``.
    """
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(f"[{SECTION}]\n{text}")
    except configparser.Error as err:
        raise ConfigError(f"cannot parse {path}: {err}") from err
    return {s: {k: parse_value(v, k) for k, v in parser.items(s)} for s in parser.sections()}


def _number(mapping: Mapping[str, Any], key: str, default=None):
    if key not in mapping:
        if default is None:
            raise ConfigError("missing required key", key)
        return default
    value = mapping[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", key)
    return float(value)


def _number_or_list(mapping: Mapping[str, Any], key: str):
    if key not in mapping:
        raise ConfigError("missing required key", key)
    value = mapping[key]
    if isinstance(value, list):
        if not value or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                for v in value):
            raise ConfigError(f"expected a list of numbers, got {value!r}", key)
        return [float(v) for v in value]
    return _number(mapping, key)


def scenario_from_mapping(mapping: Mapping[str, Any]) -> ScenarioParams:
    unknown = set(mapping) - KNOWN_KEYS
    if unknown:
        raise ConfigError("unknown key", sorted(unknown)[0])
    lambda_b = _number_or_list(mapping, "lambda_b_per_km")
    half = _number_or_list(mapping, "mean_half_length_m")
    lanes = mapping.get("lane_heights_m")
    if isinstance(lambda_b, list) or isinstance(half, list) or isinstance(lanes, list):
        count = max(len(x) if isinstance(x, list) else 1 for x in (lambda_b, half, lanes or 0))
        lambda_b = lambda_b if isinstance(lambda_b, list) else [lambda_b] * count
        half = half if isinstance(half, list) else [half] * count
    for h in half if isinstance(half, list) else [half]:
        if not h > 0:
            raise ConfigError("mean half-length must be positive", "mean_half_length_m")
    if min(lambda_b if isinstance(lambda_b, list) else [lambda_b]) < 0:
        raise ConfigError("intensity must be non-negative", "lambda_b_per_km")
    for key in ("lambda_t_per_km", "lambda_v_per_km"):
        if key in mapping and _number(mapping, key) < 0:
            raise ConfigError("intensity must be non-negative", key)

    radio = None
    if all(k in mapping for k in RADIO_KEYS):
        try:
            radio = RadioParams(*(_number(mapping, k) for k in RADIO_KEYS))
        except ValueError as err:
            raise ConfigError(str(err), "radio") from err
    elif any(k in mapping for k in RADIO_KEYS) and "d_star_m" not in mapping:
        missing = [k for k in RADIO_KEYS if k not in mapping]
        raise ConfigError("incomplete radio parameters", missing[0])

    try:
        return ScenarioParams(
            lambda_t=_number(mapping, "lambda_t_per_km") / 1000.0,
            lambda_b=[x / 1000.0 for x in lambda_b] if isinstance(lambda_b, list)
            else lambda_b / 1000.0,
            mu=[1.0 / x for x in half] if isinstance(half, list) else 1.0 / half,
            d1=_number(mapping, "d1_m"),
            d2=_number(mapping, "d2_m"),
            lambda_v=_number(mapping, "lambda_v_per_km", 0.0) / 1000.0,
            radio=radio,
            d_star=_number(mapping, "d_star_m") if "d_star_m" in mapping else None,
            lane_heights=lanes,
            v=_number(mapping, "v_mps", 0.0),
            v_o=_number(mapping, "vo_mps", 0.0),
            allow_small_offsets=bool(mapping.get("allow_small_offsets", False)),
        )
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(str(err), _guess_key(str(err))) from err


def _guess_key(message: str) -> str | None:
    words = set(re.findall(r"\w+", message))
    for needle, key in (("lane", "lane_heights_m"), ("lanes", "lane_heights_m"), ("d1", "d1_m"),
                        ("d2", "d2_m"), ("mu", "mean_half_length_m"), ("speed", "v_mps"),
                        ("speeds", "v_mps")):
        if needle in words:
            return key
    return None


def scenario_to_mapping(params: ScenarioParams) -> dict[str, Any]:
    """Inverse of :func:`scenario_from_mapping` (file units)."""
    lanes = params.lanes
    multi = params.is_multilane
    out: dict[str, Any] = {
        "lambda_t_per_km": params.lambda_t * 1000.0,
        "lambda_b_per_km": [l[0] * 1000.0 for l in lanes] if multi else lanes[0][0] * 1000.0,
        "lambda_v_per_km": params.lambda_v * 1000.0,
        "mean_half_length_m": [1.0 / l[1] for l in lanes] if multi else 1.0 / lanes[0][1],
        "lane_heights_m": list(params.lane_heights),
        "d1_m": params.d1,
        "d2_m": params.d2,
        "v_mps": params.v,
        "vo_mps": params.v_o,
    }
    if params.radio is not None:
        out.update(p=params.radio.p, sigma=params.radio.sigma,
                   alpha_los=params.radio.alpha_los, tau=params.radio.tau)
    if params.d_star is not None:
        out["d_star_m"] = params.d_star
    if params.allow_small_offsets:
        out["allow_small_offsets"] = True
    return out


def resolve_path(name) -> Path:
    """Find a scenario file: as given, under ``$LOSCOV_SCENARIO_DIR``, or bundled by stem."""
    path = Path(name)
    if path.is_file():
        return path
    candidates = []
    env_dir = os.environ.get(SCENARIO_DIR_ENV)
    if env_dir:
        candidates += [Path(env_dir) / path, Path(env_dir) / f"{path}.cfg"]
    bundled = resources.files("loscov") / "scenarios"
    candidates += [Path(str(bundled / path.name)), Path(str(bundled / f"{path.name}.cfg"))]
    for c in candidates:
        if c.is_file():
            return c
    raise ConfigError(f"scenario file not found: {name}")


def load_scenario(name) -> ScenarioParams:
    sections = read_sections(resolve_path(name))
    return scenario_from_mapping(sections.get(SECTION, {}))
