"""Grid sweeps over drive strength and probe frequency, plus text export.

Every drive row is a pure function of its drive value, so rows are computed
independently (optionally in a thread pool) and assembled by index. Results
do not depend on the worker count.
"""

from __future__ import annotations

import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Optional

import numpy as np

from . import __version__
from .core import DriveConfig, PowerCalibration, SystemParams, to_cycles
from .dressed import LABELS, SIDEBAND_PAIRS, overlaps, sideband_frequencies
from .response import ResponseModel

log = logging.getLogger(__name__)

OUTPUTS = ("transmission_map", "dressed_energies", "overlaps", "populations", "sidebands", "self_transmission")
DRIVE_FREQUENCY_MODES = ("half_omega20", "omega10", "explicit")

# column names of the per-drive outputs
DRIVE_COLUMNS = {
    "dressed_energies": [f"energy_{m}_ghz" for m in LABELS],
    "overlaps": [f"overlap_{j}{m}" for j in range(3) for m in LABELS],
    "populations": [f"rho_{m}{m}" for m in LABELS]
    + ["abs_rho_gm", "abs_rho_ge", "abs_rho_me", "purity"],
    "sidebands": [f"sideband_{lo}{up}_ghz" for lo, up in SIDEBAND_PAIRS],
    "self_transmission": ["re_t_drive", "im_t_drive"],
}


@dataclass(frozen=True)
class SweepSpec:
    """Grid definition.

    ``drive_scale`` is ``"rabi"`` (axis values are ``rabi10`` in GHz) or
    ``"dbm"`` (axis values are powers, converted through ``calibration``).
    A one-point axis needs ``min == max``.
    """

    drive_min: float = 0.0
    drive_max: float = 1.0
    drive_n: int = 101
    drive_scale: str = "rabi"
    probe_min: float = 6.6
    probe_max: float = 8.1
    probe_n: int = 301
    drive_frequency_mode: str = "half_omega20"
    drive_frequency: Optional[float] = None
    outputs: tuple = ("transmission_map",)
    calibration: Optional[PowerCalibration] = None
    nonideal: bool = False

    def __post_init__(self):
        for lo, hi, n, name in (
            (self.drive_min, self.drive_max, self.drive_n, "drive"),
            (self.probe_min, self.probe_max, self.probe_n, "probe"),
        ):
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError(f"{name} axis bounds must be finite")
            if n < 1:
                raise ValueError(f"{name} axis needs at least one point")
            if n == 1 and lo != hi:
                raise ValueError(f"one-point {name} axis needs min == max")
            if n > 1 and not hi > lo:
                raise ValueError(f"{name} axis must be strictly increasing")
        if self.drive_scale not in ("rabi", "dbm"):
            raise ValueError(f"unknown drive scale {self.drive_scale!r}")
        if self.drive_scale == "dbm" and self.calibration is None:
            raise ValueError("dbm drive axis needs a calibration")
        if self.drive_scale == "rabi" and self.drive_min < 0:
            raise ValueError("Rabi frequencies must be non-negative")
        if self.drive_frequency_mode not in DRIVE_FREQUENCY_MODES:
            raise ValueError(f"unknown drive frequency mode {self.drive_frequency_mode!r}")
        if self.drive_frequency_mode == "explicit" and self.drive_frequency is None:
            raise ValueError("explicit drive frequency mode needs drive_frequency")
        bad = set(self.outputs) - set(OUTPUTS)
        if bad:
            raise ValueError(f"unknown outputs: {sorted(bad)}")
        if self.probe_min <= 0:
            raise ValueError("probe frequencies must be positive")

    @classmethod
    def two_photon_map(cls, **kw) -> "SweepSpec":
        """Transmission map at the two-photon drive frequency."""
        base = dict(drive_min=0.0, drive_max=1.0, drive_n=201, probe_min=6.6, probe_max=8.1, probe_n=301)
        base.update(kw)
        return cls(**base)

    @classmethod
    def resonant_power_map(cls, **kw) -> "SweepSpec":
        """Transmission map with the drive on the 0-1 transition, power axis in dBm."""
        base = dict(
            drive_min=-140.0,
            drive_max=-100.0,
            drive_n=81,
            drive_scale="dbm",
            probe_min=6.6,
            probe_max=8.1,
            probe_n=301,
            drive_frequency_mode="omega10",
            calibration=PowerCalibration(),
        )
        base.update(kw)
        return cls(**base)

    def drive_axis(self) -> np.ndarray:
        return np.linspace(self.drive_min, self.drive_max, self.drive_n)

    def probe_axis(self) -> np.ndarray:
        return np.linspace(self.probe_min, self.probe_max, self.probe_n)

    def rabi_axis(self) -> np.ndarray:
        values = self.drive_axis()
        if self.drive_scale == "dbm":
            return np.asarray(self.calibration.rabi10(values), dtype=float)
        return values

    def omega_d(self, params: SystemParams) -> float:
        if self.drive_frequency_mode == "half_omega20":
            return params.omega20 / 2.0
        if self.drive_frequency_mode == "omega10":
            return params.omega10
        return float(self.drive_frequency)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["outputs"] = list(self.outputs)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        d = dict(d)
        if d.get("calibration") is not None:
            d["calibration"] = PowerCalibration(**d["calibration"])
        d["outputs"] = tuple(d.get("outputs", ("transmission_map",)))
        return cls(**d)


@dataclass
class SweepResult:
    """Arrays of a finished sweep.

    ``data["transmission_map"]`` has shape ``(n_drive, n_probe)``; the
    per-drive outputs have shape ``(n_drive, k)`` with columns named in
    ``DRIVE_COLUMNS``. ``flags`` marks failed cells with 1; failed cells hold
    NaN.
    """

    drive_values: np.ndarray
    rabi10: np.ndarray
    probe_ghz: np.ndarray
    data: dict
    flags: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def shape(self):
        return (len(self.drive_values), len(self.probe_ghz))


def _row(params: SystemParams, spec: SweepSpec, omega_d: float, rabi: float, probe: np.ndarray):
    drive = DriveConfig.from_rabi10(omega_d, rabi)
    model = ResponseModel(params, drive, spec.nonideal)
    out = {}
    if "transmission_map" in spec.outputs:
        out["transmission_map"] = model.transmission(probe)
    if "dressed_energies" in spec.outputs:
        out["dressed_energies"] = to_cycles(model.basis.energies)
    if "overlaps" in spec.outputs:
        out["overlaps"] = overlaps(model.basis).reshape(9)
    if "populations" in spec.outputs:
        st = model.stationary
        rho = st.rho.data
        out["populations"] = np.concatenate(
            [st.populations, np.abs([rho[0, 1], rho[0, 2], rho[1, 2]]), [st.purity]]
        )
    if "sidebands" in spec.outputs:
        out["sidebands"] = sideband_frequencies(model.basis, omega_d=omega_d).frequencies
    if "self_transmission" in spec.outputs:
        t = model.self_transmission()
        out["self_transmission"] = np.array([t.real, t.imag])
    return out


def _widths(spec: SweepSpec, n_probe: int) -> dict:
    widths = {name: len(cols) for name, cols in DRIVE_COLUMNS.items()}
    widths["transmission_map"] = n_probe
    return {k: v for k, v in widths.items() if k in spec.outputs}


def run_sweep(
    params: SystemParams,
    spec: SweepSpec,
    threads: Optional[int] = None,
    timestamp: bool = False,
) -> SweepResult:
    """Evaluate every requested output on the grid.

    A failing drive row is logged and flagged; it never aborts the sweep.
    """
    drive_values = spec.drive_axis()
    rabi = spec.rabi_axis()
    probe = spec.probe_axis()
    omega_d = spec.omega_d(params)
    widths = _widths(spec, len(probe))
    data = {}
    for name, w in widths.items():
        data[name] = np.full((len(rabi), w), np.nan, dtype=complex if name == "transmission_map" else float)
    flags = np.zeros((len(rabi), len(probe)), dtype=np.int8)

    def work(i):
        try:
            return i, _row(params, spec, omega_d, float(rabi[i]), probe)
        except (np.linalg.LinAlgError, ArithmeticError, RuntimeError, ValueError) as exc:
            log.warning("drive row %d (rabi10=%g GHz) failed: %s", i, rabi[i], exc)
            return i, None

    if threads is None or threads <= 1:
        rows = map(work, range(len(rabi)))
    else:
        pool = ThreadPoolExecutor(max_workers=threads)
        rows = pool.map(work, range(len(rabi)))
    try:
        for i, row in rows:
            if row is None:
                flags[i, :] = 1
                continue
            for name, values in row.items():
                data[name][i] = values
                if not np.all(np.isfinite(values)):
                    flags[i, :] = 1
    finally:
        if threads is not None and threads > 1:
            pool.shutdown()

    metadata = {
        "params": params.to_dict(),
        "spec": spec.to_dict(),
        "omega_d_ghz": omega_d,
        "version": __version__,
    }
    if timestamp:
        metadata["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return SweepResult(drive_values, rabi, probe, data, flags, metadata)


# ---------------------------------------------------------------------------
# export

LONG_HEADER = "drive_value,probe_ghz,re_t,im_t,abs_t,flag"


def _meta_line(metadata: dict) -> str:
    return "# metadata: " + json.dumps(metadata, sort_keys=True, separators=(",", ":")) + "\n"


def _fmt(x: float) -> str:
    return repr(float(x))


def export(result: SweepResult, format: str = "long") -> bytes:
    """Serialise a sweep.

    ``long``: one CSV row per cell. ``matrix``: ``|t|`` as a labelled
    matrix block for heatmap tools. ``drive_table``: one row per drive value
    with every per-drive output requested.
    """
    buf = io.StringIO()
    buf.write(_meta_line(result.metadata))
    if format == "long":
        if "transmission_map" not in result.data:
            raise ValueError("sweep has no transmission map")
        t = result.data["transmission_map"]
        buf.write(LONG_HEADER + "\n")
        for i, d in enumerate(result.drive_values):
            for j, p in enumerate(result.probe_ghz):
                re, im = float(t[i, j].real), float(t[i, j].imag)
                buf.write(f"{_fmt(d)},{_fmt(p)},{_fmt(re)},{_fmt(im)},{_fmt(math.hypot(re, im))},{int(result.flags[i, j])}\n")
    elif format == "matrix":
        if "transmission_map" not in result.data:
            raise ValueError("sweep has no transmission map")
        a = np.abs(result.data["transmission_map"])
        buf.write("# matrix: abs_t; rows: drive_value; columns: probe_ghz\n")
        buf.write(f"# shape: {a.shape[0]} {a.shape[1]}\n")
        buf.write("drive_value\\probe_ghz," + ",".join(_fmt(p) for p in result.probe_ghz) + "\n")
        for i, d in enumerate(result.drive_values):
            buf.write(_fmt(d) + "," + ",".join(_fmt(v) for v in a[i]) + "\n")
    elif format == "drive_table":
        names = [n for n in OUTPUTS if n != "transmission_map" and n in result.data]
        if not names:
            raise ValueError("sweep has no per-drive outputs")
        cols = ["drive_value", "rabi10_ghz"] + [c for n in names for c in DRIVE_COLUMNS[n]] + ["flag"]
        buf.write(",".join(cols) + "\n")
        for i, d in enumerate(result.drive_values):
            vals = [_fmt(d), _fmt(result.rabi10[i])]
            for n in names:
                vals += [_fmt(v) for v in result.data[n][i]]
            vals.append(str(int(result.flags[i].max(initial=0))))
            buf.write(",".join(vals) + "\n")
    else:
        raise ValueError(f"unsupported export format {format!r}")
    return buf.getvalue().encode("utf-8")


def parse_long(blob) -> SweepResult:
    """Inverse of ``export(..., "long")``."""
    text = blob.decode("utf-8") if isinstance(blob, bytes) else blob
    metadata = {}
    rows = []
    header_seen = False
    for line in text.splitlines():
        if line.startswith("# metadata: "):
            metadata = json.loads(line[len("# metadata: "):])
            continue
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line != LONG_HEADER:
                raise ValueError(f"unexpected header {line!r}")
            header_seen = True
            continue
        d, p, re, im, _, flag = line.split(",")
        rows.append((float(d), float(p), float(re), float(im), int(flag)))
    if not rows:
        raise ValueError("no data rows")
    drive = list(dict.fromkeys(r[0] for r in rows))
    probe = list(dict.fromkeys(r[1] for r in rows))
    if len(rows) != len(drive) * len(probe):
        raise ValueError("rows do not form a full grid")
    arr = np.array([r[2:4] for r in rows]).reshape(len(drive), len(probe), 2)
    flags = np.array([r[4] for r in rows], dtype=np.int8).reshape(len(drive), len(probe))
    t = np.empty(arr.shape[:2], dtype=complex)
    t.real, t.imag = arr[..., 0], arr[..., 1]
    spec = metadata.get("spec")
    rabi = np.asarray(drive, dtype=float)
    if spec and spec.get("drive_scale") == "dbm":
        rabi = np.asarray(SweepSpec.from_dict(spec).calibration.rabi10(rabi), dtype=float)
    return SweepResult(np.asarray(drive), rabi, np.asarray(probe), {"transmission_map": t}, flags, metadata)
