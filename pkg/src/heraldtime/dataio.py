"""Durable formats: event files, run configuration, result reports.

Event files are plain CSV with a ``#``-prefixed key=value header block::

    # heraldtime events v1
    # units = ps
    # count = 3
    # meta = {"seed": 42}
    -12.5,100.25
    ...

The ``units`` declaration is mandatory and applies to both columns; times are
converted to seconds on read.  Values are written with shortest round-trip
float formatting, so a file written and re-read in the same unit preserves
every value bit-for-bit (and converting units is exact whenever the product
is exactly representable).

Run configuration is a flat ``key = value`` text file with explicit unit
suffixes on dimensioned quantities::

    source.sigma   = 3.29 THz
    source.tau_p   = 964 fs
    link.two_beta  = -2.27e-26 s^2/m
    link.length    = 10 km
    sample.n       = 82000
    sample.seed    = 7

``link.two_beta`` exists because dispersion is sometimes quoted as the
combined two-arm coefficient; exactly one of ``link.beta`` / ``link.two_beta``
must be present.  Frequency-like widths accept Hz-style suffixes, read as
plain 1/s formula units.  Validation reports every violation at once, and
unknown keys are rejected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fitting import FitConfig
from .params import (
    HeraldtimeError,
    LinkParams,
    SourceParams,
    SourceParamsRho,
    from_rho_form,
)
from .sampler import DetectorModel, EventSet

__all__ = [
    "EventFileError",
    "ConfigError",
    "ReportError",
    "CONFIG_SCHEMA",
    "RunConfig",
    "read_events",
    "write_events",
    "write_report",
    "load_config",
    "parse_quantity",
    "format_schema_help",
]

EVENT_MAGIC = "# heraldtime events v1"

TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9, "ps": 1e-12,
              "fs": 1e-15}
LENGTH_UNITS = {"m": 1.0, "km": 1e3, "cm": 1e-2, "mm": 1e-3, "nm": 1e-9}
FREQUENCY_UNITS = {"1/s": 1.0, "/s": 1.0, "Hz": 1.0, "kHz": 1e3, "MHz": 1e6,
                   "GHz": 1e9, "THz": 1e12}
DISPERSION_UNITS = {"s^2/m": 1.0, "s2/m": 1.0, "ps^2/km": 1e-27,
                    "ps2/km": 1e-27}

_UNIT_TABLES = {
    "time": TIME_UNITS,
    "length": LENGTH_UNITS,
    "frequency": FREQUENCY_UNITS,
    "dispersion": DISPERSION_UNITS,
}


class EventFileError(HeraldtimeError):
    """Malformed event file; the message names the offending line."""


class ConfigError(HeraldtimeError):
    """Invalid run configuration; the message lists every violation."""


class ReportError(HeraldtimeError):
    """A result report could not be serialized (I/O failure or NaN)."""


# --------------------------------------------------------------------------
# Quantities
# --------------------------------------------------------------------------

def parse_quantity(text: str, kind: str) -> float:
    """Parse "value [unit]" into base SI for the given kind.

    Kinds: time (s), length (m), frequency (1/s), dispersion (s^2/m),
    float/int (bare numbers), bool, str.  Dimensioned kinds require an
    explicit unit suffix.
    """
    text = text.strip()
    if kind == "str":
        return text  # type: ignore[return-value]
    if kind == "bool":
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True  # type: ignore[return-value]
        if low in ("false", "no", "off", "0"):
            return False  # type: ignore[return-value]
        raise ValueError(f"expected a boolean, got {text!r}")
    if kind in ("float", "int"):
        try:
            value = float(text)
        except ValueError:
            raise ValueError(f"expected a number, got {text!r}") from None
        if kind == "int":
            if not value.is_integer():
                raise ValueError(f"expected an integer, got {text!r}")
            return int(value)  # type: ignore[return-value]
        return value
    table = _UNIT_TABLES.get(kind)
    if table is None:
        raise ValueError(f"unknown quantity kind {kind!r}")
    parts = text.split()
    if len(parts) != 2:
        raise ValueError(
            f"expected 'value unit' with unit in {sorted(table)}, got {text!r}")
    raw, unit = parts
    if unit not in table:
        raise ValueError(f"unknown {kind} unit {unit!r}; known: {sorted(table)}")
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"expected a number, got {raw!r}") from None
    return value * table[unit]


# --------------------------------------------------------------------------
# Event files
# --------------------------------------------------------------------------

def write_events(events: EventSet, path, unit: str = "s") -> None:
    """Write an event set as CSV with a header block; deterministic output."""
    if unit not in TIME_UNITS:
        raise ValueError(f"unknown time unit {unit!r}; known: {sorted(TIME_UNITS)}")
    scale = TIME_UNITS[unit]
    path = Path(path)
    lines = [EVENT_MAGIC, f"# units = {unit}", f"# count = {events.count}"]
    if events.metadata:
        lines.append("# meta = " + json.dumps(events.metadata, sort_keys=True,
                                              allow_nan=False, default=str))
    for t1, t2 in events.events:
        lines.append(f"{float(t1 / scale)!r},{float(t2 / scale)!r}")
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write event file {path}: {exc}") from exc


def read_events(path) -> EventSet:
    """Read an event file; all times are converted to seconds.

    Raises :class:`EventFileError` naming the line for any malformed content.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise EventFileError(f"cannot read event file {path}: {exc}") from exc

    lines = text.splitlines()
    if not lines or lines[0].strip() != EVENT_MAGIC:
        raise EventFileError(
            f"{path}:1: missing magic header {EVENT_MAGIC!r}")
    unit_scale = None
    declared_count = None
    metadata: dict = {}
    rows: list[tuple[float, float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" not in body:
                raise EventFileError(
                    f"{path}:{lineno}: header line must be '# key = value'")
            key, _, value = body.partition("=")
            key = key.strip()
            value = value.strip()
            if key == "units":
                if value not in TIME_UNITS:
                    raise EventFileError(
                        f"{path}:{lineno}: unknown unit {value!r}; known: "
                        f"{sorted(TIME_UNITS)}")
                unit_scale = TIME_UNITS[value]
                metadata["units"] = value
            elif key == "count":
                try:
                    declared_count = int(value)
                except ValueError:
                    raise EventFileError(
                        f"{path}:{lineno}: count must be an integer, got "
                        f"{value!r}") from None
            elif key == "meta":
                try:
                    parsed = json.loads(value)
                except json.JSONDecodeError as exc:
                    raise EventFileError(
                        f"{path}:{lineno}: meta is not valid JSON: {exc}") from exc
                if not isinstance(parsed, dict):
                    raise EventFileError(
                        f"{path}:{lineno}: meta must be a JSON object")
                metadata.update(parsed)
            else:
                metadata[key] = value
            continue
        if unit_scale is None:
            raise EventFileError(
                f"{path}:{lineno}: data row before the mandatory "
                f"'# units = ...' declaration")
        parts = line.split(",")
        if len(parts) != 2:
            raise EventFileError(
                f"{path}:{lineno}: expected two comma-separated numbers, got "
                f"{line!r}")
        try:
            t1, t2 = float(parts[0]), float(parts[1])
        except ValueError:
            raise EventFileError(
                f"{path}:{lineno}: non-numeric row {line!r}") from None
        if not (math.isfinite(t1) and math.isfinite(t2)):
            raise EventFileError(f"{path}:{lineno}: non-finite row {line!r}")
        rows.append((t1 * unit_scale, t2 * unit_scale))
    if unit_scale is None:
        raise EventFileError(f"{path}: missing mandatory '# units = ...' line")
    if declared_count is not None and declared_count != len(rows):
        raise EventFileError(
            f"{path}: header declares count = {declared_count} but file has "
            f"{len(rows)} rows")
    arr = np.array(rows, dtype=float).reshape(len(rows), 2)
    return EventSet(arr, metadata)


# --------------------------------------------------------------------------
# Reports
# --------------------------------------------------------------------------

def write_report(payload, path) -> None:
    """Serialize a result mapping as deterministic JSON; NaN is rejected."""
    if hasattr(payload, "summary"):
        payload = payload.summary()
    try:
        text = json.dumps(payload, sort_keys=True, indent=2, allow_nan=False,
                          default=_json_default)
    except ValueError as exc:
        raise ReportError(f"report contains non-finite values: {exc}") from exc
    try:
        Path(path).write_text(text + "\n", encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write report {path}: {exc}") from exc


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj).__name__}")


def _cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        raise ReportError("table contains NaN")
    return repr(value)


def write_table(path, header: list[str], rows) -> None:
    """Write a plot-ready CSV table with shortest round-trip float formatting."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write table {path}: {exc}") from exc


# --------------------------------------------------------------------------
# Run configuration
# --------------------------------------------------------------------------

# key -> (kind, description).  This table is the single source of truth for
# parsing, validation, --set overrides and the CLI help text.
CONFIG_SCHEMA: dict[str, tuple[str, str]] = {
    "source.sigma": ("frequency", "effective phase-matching width (e.g. '3.29 THz')"),
    "source.tau_p": ("time", "pump pulse duration (e.g. '964 fs')"),
    "source.sigma0": ("frequency", "single-photon spectral width (alt. parametrization)"),
    "source.rho": ("float", "spectral correlation coefficient in (-1, 1)"),
    "source.cw": ("bool", "continuous-wave pump flag (uses source.sigma only)"),
    "link.beta": ("dispersion", "per-arm dispersion coefficient (e.g. '-1.15e-26 s^2/m')"),
    "link.two_beta": ("dispersion", "combined two-arm dispersion 2*beta (alternative to link.beta)"),
    "link.length": ("length", "fiber length per arm (e.g. '10 km')"),
    "detector.jitter1": ("time", "channel-1 Gaussian jitter std dev"),
    "detector.jitter2": ("time", "channel-2 Gaussian jitter std dev"),
    "detector.reference_jitter": ("time", "common-mode reference-clock jitter std dev"),
    "detector.background_rate": ("float", "uniform background fraction in [0, 1)"),
    "detector.window_lo": ("time", "background window lower edge"),
    "detector.window_hi": ("time", "background window upper edge"),
    "sample.n": ("int", "number of coincidence events to draw"),
    "sample.seed": ("int", "random seed"),
    "fit.bins1": ("int", "histogram bins, channel 1 (>= 8)"),
    "fit.bins2": ("int", "histogram bins, channel 2 (>= 8)"),
    "fit.loss": ("str", "'hist-ls' or 'ml'"),
    "fit.max_iterations": ("int", "optimizer evaluation cap"),
    "fit.tolerance": ("float", "optimizer convergence tolerance"),
    "fit.percentile_lo": ("float", "histogram range lower percentile"),
    "fit.percentile_hi": ("float", "histogram range upper percentile"),
    "herald.direction": ("int", "heralding channel, 1 or 2 (default 2)"),
    "herald.center": ("time", "detection window center"),
    "herald.width": ("time", "detection window width"),
    "herald.width_min": ("time", "narrowing-curve grid start"),
    "herald.width_max": ("time", "narrowing-curve grid stop"),
    "herald.width_points": ("int", "narrowing-curve grid size (>= 3)"),
    "herald.center_min": ("time", "centroid-curve grid start"),
    "herald.center_max": ("time", "centroid-curve grid stop"),
    "herald.center_points": ("int", "centroid-curve grid size (>= 3)"),
    "landscape.tau_p_min": ("time", "landscape pump-duration axis start"),
    "landscape.tau_p_max": ("time", "landscape pump-duration axis stop"),
    "landscape.tau_p_points": ("int", "landscape pump-duration axis size"),
    "landscape.sigma_min": ("frequency", "landscape sigma axis start"),
    "landscape.sigma_max": ("frequency", "landscape sigma axis stop"),
    "landscape.sigma_points": ("int", "landscape sigma axis size"),
    "meta.delta_lambda": ("length", "pump bandwidth annotation, copied into reports"),
}

_DEFAULTS = {
    "sample.n": 82000,
    "sample.seed": 1,
    "detector.jitter1": 0.0,
    "detector.jitter2": 0.0,
    "detector.reference_jitter": 0.0,
    "detector.background_rate": 0.0,
    "fit.bins1": 64,
    "fit.bins2": 64,
    "fit.loss": "hist-ls",
    "fit.max_iterations": 1000,
    "fit.tolerance": 1e-10,
    "fit.percentile_lo": 0.5,
    "fit.percentile_hi": 99.5,
    "herald.direction": 2,
    "herald.center": 0.0,
}


@dataclass
class RunConfig:
    """Parsed and validated run configuration; see CONFIG_SCHEMA for keys."""

    values: dict = field(default_factory=dict)

    def get(self, key: str, default=None):
        return self.values.get(key, _DEFAULTS.get(key, default))

    def has(self, key: str) -> bool:
        return key in self.values

    def require(self, *keys: str, why: str = "") -> None:
        """Raise ConfigError listing every missing key (considering defaults)."""
        missing = [k for k in keys if self.get(k) is None]
        if missing:
            suffix = f" ({why})" if why else ""
            raise ConfigError("missing required config keys" + suffix + ":\n  - "
                              + "\n  - ".join(missing))

    def require_source(self) -> None:
        if not (self.has("source.sigma") or self.has("source.sigma0")):
            raise ConfigError(
                "a source parametrization is required: (source.sigma + "
                "source.tau_p) | (source.sigma0 + source.rho) | "
                "(source.cw + source.sigma)")

    def require_link(self) -> None:
        if not (self.has("link.beta") or self.has("link.two_beta")):
            raise ConfigError("link.beta or link.two_beta (and link.length) "
                              "are required")

    # -- resolved objects ---------------------------------------------------

    def source(self) -> SourceParams:
        if self.get("source.cw"):
            return SourceParams.cw_pump(self.get("source.sigma"))
        if self.has("source.sigma0"):
            return from_rho_form(SourceParamsRho(sigma0=self.get("source.sigma0"),
                                                 rho=self.get("source.rho")))
        return SourceParams(sigma=self.get("source.sigma"),
                            tau_p=self.get("source.tau_p"))

    def link(self) -> LinkParams:
        beta = self.get("link.beta")
        if beta is None:
            beta = self.get("link.two_beta") / 2.0
        return LinkParams(beta=beta, length=self.get("link.length"))

    def detector(self) -> DetectorModel:
        window = None
        if self.has("detector.window_lo") or self.has("detector.window_hi"):
            window = (self.get("detector.window_lo"),
                      self.get("detector.window_hi"))
        return DetectorModel(
            jitter1=self.get("detector.jitter1"),
            jitter2=self.get("detector.jitter2"),
            reference_jitter=self.get("detector.reference_jitter"),
            background_rate=self.get("detector.background_rate"),
            window=window,
        )

    def fit_config(self) -> FitConfig:
        return FitConfig(
            bins1=self.get("fit.bins1"),
            bins2=self.get("fit.bins2"),
            loss=self.get("fit.loss"),
            max_iterations=self.get("fit.max_iterations"),
            tolerance=self.get("fit.tolerance"),
            percentiles=(self.get("fit.percentile_lo"),
                         self.get("fit.percentile_hi")),
        )

    def grid(self, prefix: str, scale: str = "log") -> np.ndarray:
        """Grid from <prefix>_min / <prefix>_max / <prefix>_points keys."""
        lo = self.get(f"{prefix}_min")
        hi = self.get(f"{prefix}_max")
        n = self.get(f"{prefix}_points")
        if lo is None or hi is None or n is None:
            raise ConfigError(
                f"grid keys {prefix}_min/{prefix}_max/{prefix}_points are "
                f"required for this command")
        if scale == "log":
            return np.geomspace(lo, hi, int(n))
        return np.linspace(lo, hi, int(n))


def _validate(values: dict) -> list[str]:
    problems = []
    has_pulse = "source.sigma" in values and "source.tau_p" in values
    has_rho = "source.sigma0" in values or "source.rho" in values
    cw = bool(values.get("source.cw", False))
    if has_rho and ("source.sigma0" in values) != ("source.rho" in values):
        problems.append("source.sigma0 and source.rho must be given together")
    styles = sum([has_pulse and not cw, has_rho,
                  cw and "source.sigma" in values])
    if "source.sigma" in values or "source.tau_p" in values or has_rho or cw:
        if styles != 1:
            problems.append(
                "exactly one source parametrization is required: "
                "(source.sigma + source.tau_p) | (source.sigma0 + source.rho) "
                "| (source.cw + source.sigma)")
        if cw and "source.tau_p" in values:
            problems.append("source.cw excludes source.tau_p")
    if ("link.beta" in values) == ("link.two_beta" in values) and (
            "link.beta" in values or "link.two_beta" in values):
        problems.append("exactly one of link.beta / link.two_beta is required")
    if ("link.beta" in values or "link.two_beta" in values) \
            and "link.length" not in values:
        problems.append("link.length is required with link.beta/link.two_beta")
    rate = values.get("detector.background_rate", 0.0)
    if rate and ("detector.window_lo" not in values
                 or "detector.window_hi" not in values):
        problems.append("detector.background_rate > 0 requires "
                        "detector.window_lo and detector.window_hi")
    if ("detector.window_lo" in values) != ("detector.window_hi" in values):
        problems.append("detector.window_lo and detector.window_hi must be "
                        "given together")
    return problems


def _parse_pairs(pairs, origin: str) -> dict:
    values = {}
    problems = []
    for lineno, key, raw in pairs:
        where = f"{origin}:{lineno}" if lineno else origin
        if key not in CONFIG_SCHEMA:
            problems.append(f"{where}: unknown key {key!r}")
            continue
        kind, _ = CONFIG_SCHEMA[key]
        try:
            values[key] = parse_quantity(raw, kind)
        except ValueError as exc:
            problems.append(f"{where}: {key}: {exc}")
    if problems:
        raise ConfigError("invalid configuration:\n  - "
                          + "\n  - ".join(problems))
    return values


def load_config(path, overrides=()) -> RunConfig:
    """Load and validate a config file, then apply ``--set`` overrides.

    All violations (unknown keys, bad units, missing counterparts) are
    collected and reported together in one :class:`ConfigError`.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    pairs = []
    problems = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            problems.append(f"{path}:{lineno}: expected 'key = value', got "
                            f"{stripped!r}")
            continue
        key, _, raw = stripped.partition("=")
        pairs.append((lineno, key.strip(), raw.strip()))
    if problems:
        raise ConfigError("invalid configuration:\n  - "
                          + "\n  - ".join(problems))
    values = _parse_pairs(pairs, str(path))
    values.update(parse_overrides(overrides))
    structural = _validate(values)
    if structural:
        raise ConfigError("invalid configuration:\n  - "
                          + "\n  - ".join(structural))
    return RunConfig(values)


def parse_overrides(overrides) -> dict:
    """Parse ``key=value`` override strings against the schema."""
    pairs = []
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        pairs.append((None, key.strip(), raw.strip()))
    return _parse_pairs(pairs, "--set")


def format_schema_help() -> str:
    """Human-readable table of every config key, its kind and meaning."""
    width = max(len(k) for k in CONFIG_SCHEMA)
    lines = ["configuration keys (units in parentheses):"]
    for key, (kind, desc) in CONFIG_SCHEMA.items():
        unit_hint = {"time": "time, e.g. ps/ns/s", "length": "length, e.g. m/km",
                     "frequency": "1/s, e.g. GHz/THz",
                     "dispersion": "s^2/m or ps^2/km"}.get(kind, kind)
        lines.append(f"  {key.ljust(width)}  ({unit_hint}) {desc}")
    return "\n".join(lines)
