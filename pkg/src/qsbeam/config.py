"""JSON configuration parsing for scenarios, arrays, and CLI range syntax.

All validation failures raise ConfigError so the CLI can map them to its
invalid-configuration exit code.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError
from .geometry import ArrayParams
from .pipeline import DoaGrid, Scenario, ScenarioSource

_ARRAY_KEYS = {
    "n_per_loop",
    "loops_per_cylinder",
    "elements_per_cylinder",
    "n_cylinders",
    "circular_elements",
    "d_v_wavelengths",
    "d_r_wavelengths",
    "carrier_freq_hz",
    "gain_pattern",
}
_SOURCE_KEYS = {"az_deg", "el_deg", "power_db"}
_GRID_KEYS = {"az", "el_deg"}
_SCENARIO_KEYS = {
    "array",
    "sources",
    "desired_index",
    "snr_db",
    "snapshots",
    "seed",
    "grid",
    "sample_rate_hz",
}


def _reject_unknown(d: dict, allowed: set[str], what: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(
            f"unknown {what} key(s): {', '.join(sorted(unknown))}; "
            f"allowed: {', '.join(sorted(allowed))}"
        )


def parse_range(text: str, what: str = "range") -> np.ndarray:
    """Parse inclusive "start:stop:step" (e.g. "0:90:0.25") to sample points."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ConfigError(f"{what} must look like 'start:stop:step', got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"{what} has non-numeric parts: {text!r}") from None
    if step <= 0:
        raise ConfigError(f"{what} step must be > 0")
    if stop < start:
        raise ConfigError(f"{what} stop must be >= start")
    n = int(round((stop - start) / step))
    return start + step * np.arange(n + 1)


def parse_int_list(text: str, what: str = "list") -> list[int]:
    """Parse "1,4,16" or "0..8" into an integer list."""
    text = str(text)
    if ".." in text:
        lo_s, _, hi_s = text.partition("..")
        try:
            lo, hi = int(lo_s), int(hi_s)
        except ValueError:
            raise ConfigError(f"{what} must be 'lo..hi', got {text!r}") from None
        if hi < lo:
            raise ConfigError(f"{what} upper bound below lower bound")
        return list(range(lo, hi + 1))
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"{what} must be comma-separated integers, got {text!r}") from None


def array_from_dict(d: dict[str, Any]) -> ArrayParams:
    """Build ArrayParams from a JSON "array" block, cross-checking counts."""
    if not isinstance(d, dict):
        raise ConfigError("array block must be a JSON object")
    _reject_unknown(d, _ARRAY_KEYS, "array")
    body = {k: v for k, v in d.items() if k != "elements_per_cylinder"}
    try:
        params = ArrayParams(**body)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid array parameters: {exc}") from None
    if "elements_per_cylinder" in d:
        declared = int(d["elements_per_cylinder"])
        if declared != params.elements_per_cylinder:
            raise ConfigError(
                f"elements_per_cylinder={declared} contradicts n_per_loop*"
                f"loops_per_cylinder={params.elements_per_cylinder}"
            )
    return params


def grid_from_dict(d: dict[str, Any] | None) -> DoaGrid:
    if d is None:
        return DoaGrid()
    if not isinstance(d, dict):
        raise ConfigError("grid block must be a JSON object")
    _reject_unknown(d, _GRID_KEYS, "grid")
    az = d.get("az", "0:90:5")
    if isinstance(az, str):
        pts = parse_range(az, "grid az")
    else:
        raise ConfigError("grid az must be a 'start:stop:step' string")
    if len(pts) < 2:
        raise ConfigError("grid needs at least two classes")
    steps = np.diff(pts)
    return DoaGrid(
        az_start_deg=float(pts[0]),
        az_stop_deg=float(pts[-1]),
        az_step_deg=float(steps[0]),
        el_deg=float(d.get("el_deg", 45.0)),
    )


def scenario_from_dict(d: dict[str, Any]) -> Scenario:
    """Build a Scenario from its JSON form; unknown keys are rejected."""
    if not isinstance(d, dict):
        raise ConfigError("scenario must be a JSON object")
    _reject_unknown(d, _SCENARIO_KEYS, "scenario")
    if "sources" not in d or not d["sources"]:
        raise ConfigError("scenario needs a non-empty 'sources' list")
    sources = []
    for i, s in enumerate(d["sources"]):
        if not isinstance(s, dict):
            raise ConfigError(f"source {i} must be a JSON object")
        _reject_unknown(s, _SOURCE_KEYS, f"source {i}")
        if "az_deg" not in s:
            raise ConfigError(f"source {i} is missing az_deg")
        sources.append(
            ScenarioSource(
                az_deg=float(s["az_deg"]),
                el_deg=float(s.get("el_deg", 45.0)),
                power_db=float(s.get("power_db", 0.0)),
            )
        )
    array = array_from_dict(d["array"]) if "array" in d else ArrayParams()
    try:
        return Scenario(
            array=array,
            sources=tuple(sources),
            desired_index=int(d.get("desired_index", 0)),
            snr_db=float(d.get("snr_db", 10.0)),
            snapshots=int(d.get("snapshots", 1000)),
            seed=int(d.get("seed", 7)),
            grid=grid_from_dict(d.get("grid")),
            sample_rate_hz=float(d.get("sample_rate_hz", 1.0e8)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid scenario: {exc}") from None


def array_to_dict(params: ArrayParams) -> dict[str, Any]:
    return {
        "n_per_loop": params.n_per_loop,
        "loops_per_cylinder": params.loops_per_cylinder,
        "n_cylinders": params.n_cylinders,
        "circular_elements": params.circular_elements,
        "d_v_wavelengths": params.d_v_wavelengths,
        "d_r_wavelengths": params.d_r_wavelengths,
        "carrier_freq_hz": params.carrier_freq_hz,
        "gain_pattern": params.gain_pattern,
    }


def scenario_to_dict(scenario: Scenario) -> dict[str, Any]:
    g = scenario.grid
    return {
        "array": array_to_dict(scenario.array),
        "sources": [
            {"az_deg": s.az_deg, "el_deg": s.el_deg, "power_db": s.power_db}
            for s in scenario.sources
        ],
        "desired_index": scenario.desired_index,
        "snr_db": scenario.snr_db,
        "snapshots": scenario.snapshots,
        "seed": scenario.seed,
        "grid": {
            "az": f"{g.az_start_deg:g}:{g.az_stop_deg:g}:{g.az_step_deg:g}",
            "el_deg": g.el_deg,
        },
        "sample_rate_hz": scenario.sample_rate_hz,
    }


def load_json(path: str | Path, what: str = "config") -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{what} file not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} file {path} is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ConfigError(f"{what} file {path} must hold a JSON object")
    return payload


def load_scenario(path: str | Path) -> Scenario:
    return scenario_from_dict(load_json(path, "scenario"))


def parse_snr_range(text: str) -> tuple[float, float]:
    """Parse "lo:hi" dB bounds for training SNR randomization."""
    parts = str(text).split(":")
    if len(parts) != 2:
        raise ConfigError(f"snr range must be 'lo:hi', got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError(f"snr range has non-numeric parts: {text!r}") from None
    if hi < lo:
        raise ConfigError("snr range upper bound below lower bound")
    return (lo, hi)


def parse_float_list(text: str, what: str = "list") -> list[float]:
    """Parse "a,b,c" or "start:stop:step" into floats."""
    text = str(text)
    if ":" in text:
        return [float(v) for v in parse_range(text, what)]
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"{what} must be comma-separated numbers, got {text!r}") from None
