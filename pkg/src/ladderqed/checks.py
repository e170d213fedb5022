"""Self-consistency checks run by ``ladderqed selfcheck``.

Each suite compares two independent routes to the same quantity and
returns a ``CheckResult``; none of them raise on a mismatch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import DriveConfig, ProbeConfig, SystemParams, to_angular
from .dressed import SIDEBAND_PAIRS, sideband_frequencies
from .response import ResponseModel, sideband_transmission, two_tone_oracle
from .steady import evolve_oracle, solve_stationary
from .twolevel import BlochRates, bloch_rabi, t_closed_form


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    metric: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status} {self.name}: {self.metric:.3g} (tol {self.tolerance:.3g})"
        return f"{text}  {self.detail}" if self.detail else text


def random_drive_points(params: SystemParams, n: int, seed: int = 0, rabi_max: float = 1.0):
    """Drives spread around the two-photon and single-photon resonances."""
    rng = np.random.default_rng(seed)
    centres = np.array([params.omega20 / 2.0, params.omega10])
    out = []
    for _ in range(n):
        omega_d = float(rng.choice(centres) + rng.uniform(-0.3, 0.3))
        out.append(DriveConfig.from_rabi10(omega_d, float(rng.uniform(0.0, rabi_max))))
    return out


def oracle_equivalence(
    params: SystemParams,
    drives,
    nonideal: bool = False,
    xi_sign: float = 1.0,
    tol: float = 1e-6,
) -> CheckResult:
    """Largest ``|rho_solver - rho_oracle|`` over the given drives, bare basis."""
    worst = 0.0
    rho0 = np.zeros((3, 3), dtype=complex)
    rho0[0, 0] = 1.0
    for drive in drives:
        st = solve_stationary(params, drive, nonideal, xi_sign=xi_sign)
        oracle = evolve_oracle(params, drive, rho0, nonideal=nonideal)
        diff = float(np.max(np.abs(st.rho_bare.data - oracle.data)))
        if not np.isfinite(diff):
            diff = np.inf
        worst = max(worst, diff)
    return CheckResult("oracle equivalence", worst < tol, worst, tol, f"{len(drives)} drive points")


def sideband_comparison(params: SystemParams, drive: DriveConfig, nonideal: bool = False) -> list:
    """Per sideband: ``(pair, frequency, |t|-1 isolated, |t|-1 full)``."""
    model = ResponseModel(params, drive, nonideal)
    table = sideband_frequencies(model.basis, omega_d=drive.omega_d)
    full = np.abs(model.transmission(table.frequencies)) - 1.0
    rows = []
    for k, (lo, up) in enumerate(SIDEBAND_PAIRS):
        iso = abs(sideband_transmission(params, drive, lo, up, nonideal)) - 1.0
        rows.append(((lo, up), float(table.frequencies[k]), float(iso), float(full[k])))
    return rows


def isolated_sideband_signs(
    params: SystemParams, drive: DriveConfig, nonideal: bool = False, floor: float = 1e-6
) -> CheckResult:
    """Gain/loss signs of the isolated-resonance formula against the full response.

    Sidebands where either ``||t| - 1|`` is below ``floor`` have no
    resolvable line (a dark transition or balanced populations) and are
    skipped. The relative deviation is
    reported but does not decide the outcome.
    """
    rows = [row for row in sideband_comparison(params, drive, nonideal) if min(abs(row[2]), abs(row[3])) >= floor]
    if not rows:
        return CheckResult("isolated sideband signs", False, np.inf, np.inf, "no resolvable sideband")
    agree = all(np.sign(iso) == np.sign(full) for _, _, iso, full in rows)
    dev = max(abs(iso - full) / abs(full) for _, _, iso, full in rows)
    parts = [f"{lo}{up} {100 * (iso - full) / abs(full):+.1f}%" for (lo, up), _, iso, full in rows]
    return CheckResult("isolated sideband signs", bool(agree), dev, np.inf, "rel. dev " + ", ".join(parts))


def two_level_equivalence(
    params: SystemParams,
    rabis=(0.0, 0.02, 0.05, 0.113, 0.3),
    detunings=(-0.1, -0.02, 0.0, 0.03, 0.1),
    tol: float = 1e-10,
) -> CheckResult:
    """Full solver with ``gamma21 = 0`` against the closed-form two-level result."""
    p2 = params.two_level()
    rates = BlochRates.from_params(p2)
    worst = 0.0
    for rabi in rabis:
        for det in detunings:
            omega_d = p2.omega10 + det
            drive = DriveConfig.from_rabi10(omega_d, rabi)
            t_full = ResponseModel(p2, drive, nonideal=True).self_transmission()
            t_ref = complex(t_closed_form(rates, to_angular(det), bloch_rabi(rabi)))
            worst = max(worst, abs(t_full - t_ref))
    return CheckResult("two-level equivalence", worst < tol, worst, tol, f"{len(rabis) * len(detunings)} points")


def two_tone_points(params: SystemParams, drive: DriveConfig) -> list:
    """Probe frequencies on each sideband plus two off-resonant ones."""
    basis = ResponseModel(params, drive).basis
    table = sideband_frequencies(basis, omega_d=drive.omega_d)
    freqs = list(table.frequencies) + [drive.omega_d - 0.55, drive.omega_d + 0.61]
    return [f for f in freqs if abs(f - drive.omega_d) > 1e-3]


def two_tone_agreement(
    params: SystemParams, drive: DriveConfig, freqs=None, nonideal: bool = False, tol: float = 1e-3
) -> CheckResult:
    """Linear response against direct two-tone integration, ``max ||t| - |t_oracle||``."""
    if freqs is None:
        freqs = two_tone_points(params, drive)
    model = ResponseModel(params, drive, nonideal)
    t_lin = model.transmission(freqs)
    worst = 0.0
    for f, t in zip(freqs, t_lin):
        res = two_tone_oracle(params, drive, ProbeConfig.weak(f, params), nonideal=nonideal)
        worst = max(worst, abs(abs(res.t) - abs(t)))
    return CheckResult("two-tone agreement", worst < tol, worst, tol, f"{len(freqs)} probe points")


def run_all(
    params: SystemParams,
    drive: Optional[DriveConfig] = None,
    nonideal: bool = False,
    xi_sign: float = 1.0,
    n_oracle: int = 5,
    seed: int = 0,
) -> list:
    """Every suite at the given parameters; ``drive`` defaults to 0.5 GHz at half ``omega20``."""
    if drive is None or drive.rabi10(params) == 0:
        drive = DriveConfig.from_rabi10(params.omega20 / 2.0, 0.5)
    return [
        oracle_equivalence(params, random_drive_points(params, n_oracle, seed), nonideal, xi_sign),
        isolated_sideband_signs(params, drive, nonideal),
        two_level_equivalence(params),
        two_tone_agreement(params, drive, nonideal=nonideal),
    ]
