"""INI run configuration for the command-line tool.

Every section and key is optional except where a subcommand needs it;
anything not listed in ``SCHEMA`` is rejected. Errors carry the line of the
offending key so they can be fixed without guessing.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .core import DriveConfig, PowerCalibration, ProbeConfig, SystemParams
from .sweep import OUTPUTS, SweepSpec
from .twolevel import POWER_LADDER_DBM, FIT_NAMES


class ConfigError(ValueError):
    """Invalid configuration; the message names the line when known."""


SCHEMA = {
    "system": {"preset", "omega10", "omega21", "gamma10", "gamma21", "gamma10_nr", "gamma_phi"},
    "drive": {"frequency", "mode", "value"},
    "calibration": {"anchor_dbm", "anchor_rabi10"},
    "probe": {"omega_p", "amplitude"},
    "sweep": {"drive_min", "drive_max", "drive_n", "drive_scale", "probe_min", "probe_max", "probe_n", "outputs"},
    "fit": {"data", "fixed", "reference_ghz", "max_iterations"},
    "synth": {"powers", "detuning_min", "detuning_max", "detuning_n", "noise", "seed", "reference_ghz"},
    "output": {"directory", "matrix"},
    "run": {"threads", "timestamp", "nonideal"},
}

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


def _line_index(text: str) -> dict:
    """``(section, key) -> line number`` by scanning the raw text."""
    index = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip().lower()
            index.setdefault((section, None), lineno)
            continue
        if line[:1].isspace():
            continue
        m = _KEY_RE.match(line)
        if m and section is not None:
            index.setdefault((section, m.group(1).strip().lower()), lineno)
    return index


@dataclass
class RunConfig:
    system: SystemParams
    drive: DriveConfig
    drive_frequency: str  # half_omega20 | omega10 | explicit
    calibration: PowerCalibration
    probe: Optional[ProbeConfig] = None
    sweep: Optional[SweepSpec] = None
    output_dir: Path = Path("out")
    write_matrix: bool = True
    threads: Optional[int] = None
    timestamp: bool = False
    nonideal: bool = False
    fit: dict = field(default_factory=dict)
    synth: dict = field(default_factory=dict)
    source: str = "<defaults>"


class _Reader:
    def __init__(self, parser, lines, source):
        self.parser = parser
        self.lines = lines
        self.source = source

    def where(self, section, key=None):
        lineno = self.lines.get((section, key)) or self.lines.get((section, None))
        return f"{self.source}:{lineno}" if lineno else self.source

    def fail(self, section, key, msg):
        raise ConfigError(f"{self.where(section, key)}: [{section}] {key}: {msg}")

    def has(self, section, key):
        return self.parser.has_option(section, key)

    def raw(self, section, key, default=None):
        if not self.has(section, key):
            return default
        return self.parser.get(section, key).strip()

    def number(self, section, key, default=None, kind=float, minimum=None, positive=False):
        text = self.raw(section, key)
        if text is None:
            return default
        try:
            value = kind(text)
        except ValueError:
            self.fail(section, key, f"expected a {kind.__name__}, got {text!r}")
        if isinstance(value, float) and not math.isfinite(value):
            self.fail(section, key, "must be finite")
        if positive and value <= 0:
            self.fail(section, key, f"must be positive, got {value}")
        if minimum is not None and value < minimum:
            self.fail(section, key, f"must be >= {minimum}, got {value}")
        return value

    def flag(self, section, key, default=False):
        if not self.has(section, key):
            return default
        try:
            return self.parser.getboolean(section, key)
        except ValueError:
            self.fail(section, key, f"expected a boolean, got {self.raw(section, key)!r}")

    def words(self, section, key, default=()):
        text = self.raw(section, key)
        if text is None:
            return tuple(default)
        return tuple(w.strip() for w in text.split(",") if w.strip())


def _apply_overrides(parser, overrides, lines):
    for item in overrides or ():
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set {item!r}: expected section.key=value")
        dotted, value = item.split("=", 1)
        section, key = (s.strip().lower() for s in dotted.split(".", 1))
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, value.strip())
        lines.pop((section, key), None)


def _check_schema(parser, r: _Reader):
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{r.where(section)}: unknown section [{section}]")
        for key in parser.options(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{r.where(section, key)}: unknown key {key!r} in [{section}]")


def _system(r: _Reader) -> SystemParams:
    preset = r.raw("system", "preset", "device")
    if preset == "device":
        base = SystemParams.device()
    elif preset == "none":
        base = None
    else:
        r.fail("system", "preset", f"expected 'device' or 'none', got {preset!r}")
    values = {}
    for name in ("omega10", "omega21", "gamma10", "gamma21", "gamma10_nr", "gamma_phi"):
        v = r.number("system", name)
        if v is not None:
            values[name] = v
    try:
        if base is None:
            return SystemParams(**values)
        return replace(base, **values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{r.where('system')}: [system] {exc}") from None


def _drive(r: _Reader, system: SystemParams, cal: PowerCalibration):
    freq = r.raw("drive", "frequency", "half_omega20")
    if freq == "half_omega20":
        omega_d, mode = system.omega20 / 2.0, "half_omega20"
    elif freq == "omega10":
        omega_d, mode = system.omega10, "omega10"
    else:
        omega_d, mode = r.number("drive", "frequency", positive=True), "explicit"
    amp_mode = r.raw("drive", "mode", "rabi10")
    value = r.number("drive", "value", 0.0)
    try:
        return DriveConfig(omega_d, amp_mode, value, cal), mode
    except ValueError as exc:
        r.fail("drive", "mode" if r.has("drive", "mode") else "value", str(exc))


def _sweep(r: _Reader, drive_mode: str, omega_d: float, cal, nonideal) -> Optional[SweepSpec]:
    if not r.parser.has_section("sweep"):
        return None
    kw = dict(
        drive_min=r.number("sweep", "drive_min", 0.0),
        drive_max=r.number("sweep", "drive_max", 1.0),
        drive_n=r.number("sweep", "drive_n", 101, kind=int, minimum=1),
        drive_scale=r.raw("sweep", "drive_scale", "rabi"),
        probe_min=r.number("sweep", "probe_min", 6.6),
        probe_max=r.number("sweep", "probe_max", 8.1),
        probe_n=r.number("sweep", "probe_n", 301, kind=int, minimum=1),
        drive_frequency_mode=drive_mode,
        drive_frequency=omega_d if drive_mode == "explicit" else None,
        outputs=r.words("sweep", "outputs", ("transmission_map",)),
        calibration=cal,
        nonideal=nonideal,
    )
    for name in kw["outputs"]:
        if name not in OUTPUTS:
            r.fail("sweep", "outputs", f"unknown output {name!r}; choose from {', '.join(OUTPUTS)}")
    try:
        return SweepSpec(**kw)
    except ValueError as exc:
        raise ConfigError(f"{r.where('sweep')}: [sweep] {exc}") from None


def parse_config(text: str, source: str = "<config>", overrides=None) -> RunConfig:
    """Parse and validate configuration text; ``overrides`` are ``section.key=value`` strings."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}".replace("\n", " ")) from None
    lines = _line_index(text)
    _apply_overrides(parser, overrides, lines)
    r = _Reader(parser, lines, source)
    _check_schema(parser, r)

    system = _system(r)
    cal = PowerCalibration(
        r.number("calibration", "anchor_dbm", -110.0),
        r.number("calibration", "anchor_rabi10", 0.113, positive=True),
    )
    drive, drive_mode = _drive(r, system, cal)
    nonideal = r.flag("run", "nonideal")

    probe = None
    if r.parser.has_section("probe"):
        omega_p = r.number("probe", "omega_p", positive=True)
        if omega_p is None:
            r.fail("probe", "omega_p", "required when [probe] is present")
        amp = r.number("probe", "amplitude", None, positive=True)
        probe = ProbeConfig.weak(omega_p, system) if amp is None else ProbeConfig(omega_p, amp)

    fixed = r.words("fit", "fixed", ("gamma10_nr",))
    for name in fixed:
        if name not in FIT_NAMES:
            r.fail("fit", "fixed", f"unknown parameter {name!r}; choose from {', '.join(FIT_NAMES)}")
    data = r.raw("fit", "data")
    fit = {
        "data": None if data is None else Path(data),
        "fixed": fixed,
        "reference_ghz": r.number("fit", "reference_ghz"),
        "max_iterations": r.number("fit", "max_iterations", 200, kind=int, minimum=1),
    }
    powers = r.words("synth", "powers")
    try:
        powers = tuple(float(p) for p in powers) if powers else POWER_LADDER_DBM
    except ValueError:
        r.fail("synth", "powers", "expected a comma-separated list of numbers")
    synth = {
        "powers": powers,
        "detuning_min": r.number("synth", "detuning_min", -0.15),
        "detuning_max": r.number("synth", "detuning_max", 0.15),
        "detuning_n": r.number("synth", "detuning_n", 61, kind=int, minimum=1),
        "noise": r.number("synth", "noise", 0.01, minimum=0.0),
        "seed": r.number("synth", "seed", 0, kind=int),
        "reference_ghz": r.number("synth", "reference_ghz"),
    }
    threads = r.number("run", "threads", None, kind=int, minimum=1)

    return RunConfig(
        system=system,
        drive=drive,
        drive_frequency=drive_mode,
        calibration=cal,
        probe=probe,
        sweep=_sweep(r, drive_mode, drive.omega_d, cal, nonideal),
        output_dir=Path(r.raw("output", "directory", "out")),
        write_matrix=r.flag("output", "matrix", True),
        threads=threads,
        timestamp=r.flag("run", "timestamp"),
        nonideal=nonideal,
        fit=fit,
        synth=synth,
        source=source,
    )


def load_config(path=None, overrides=None) -> RunConfig:
    if path is None:
        return parse_config("", "<defaults>", overrides)
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path), overrides)
