"""Driven three-level ladder emitter on a one-dimensional transmission line.

Dressed states, stationary density matrices, weak-probe transmission with
its six Rabi sidebands, and the two-level drive-transmission fit.
"""

__version__ = "0.1.0"

from .core import (
    BasisMatrix,
    DriveConfig,
    PowerCalibration,
    ProbeConfig,
    SystemParams,
    build_rotating_hamiltonian,
    transition_dipole,
    xi_tensor,
    zeta_tensor,
)
from .dressed import DressedBasis, diagonalize, dressed_basis, overlaps, sideband_frequencies
from .response import (
    ResponseModel,
    drive_self_transmission,
    probe_response,
    sideband_transmission,
    transmission,
    two_tone_oracle,
)
from .steady import StationaryState, evolve_oracle, solve_stationary
from .sweep import SweepSpec, export, run_sweep
from .twolevel import BlochRates, FitResult, bloch_steady, fit_traces, t_closed_form

__all__ = [
    "BasisMatrix",
    "BlochRates",
    "DressedBasis",
    "DriveConfig",
    "FitResult",
    "PowerCalibration",
    "ProbeConfig",
    "ResponseModel",
    "StationaryState",
    "SweepSpec",
    "SystemParams",
    "bloch_steady",
    "build_rotating_hamiltonian",
    "diagonalize",
    "dressed_basis",
    "drive_self_transmission",
    "evolve_oracle",
    "export",
    "fit_traces",
    "overlaps",
    "probe_response",
    "run_sweep",
    "sideband_frequencies",
    "sideband_transmission",
    "solve_stationary",
    "t_closed_form",
    "transition_dipole",
    "transmission",
    "two_tone_oracle",
    "xi_tensor",
    "zeta_tensor",
]
