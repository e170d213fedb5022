"""Parameter records, unit conventions and operator algebra for the driven ladder.

Public quantities are in cycles units (GHz, i.e. ``omega / 2pi``); everything
that goes into a matrix is in angular units (rad/ns). Time is in ns.

Operator-expectation convention, used everywhere in the package::

    <sigma_{mu nu}> = Tr(rho |mu><nu|) = rho[nu, mu]

Expectation vectors are flattened row-major over the pair ``(mu, nu)``, so
``x[3 * mu + nu] = <sigma_{mu nu}>``; ``expectations_from_rho`` and
``rho_from_expectations`` implement the mapping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal, Optional

import numpy as np

TWO_PI = 2.0 * math.pi
DIM = 3

Basis = Literal["bare", "dressed"]
AmplitudeMode = Literal["rabi10", "field", "dbm"]


def to_angular(value_ghz):
    """Cycles frequency (GHz) -> angular frequency (rad/ns)."""
    return TWO_PI * value_ghz


def to_cycles(value_rad):
    """Angular frequency (rad/ns) -> cycles frequency (GHz)."""
    return value_rad / TWO_PI


def _check_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class SystemParams:
    """Transition frequencies and rates of the three-level emitter (GHz).

    ``gamma10_nr`` (nonradiative decay of 1 -> 0) and ``gamma_phi`` (pure
    dephasing of level 1) are only used by the two-level model and, when
    explicitly requested, by the solvers via ``nonideal=True``. The 0 <-> 2
    rate is identically zero and is not a field.
    """

    omega10: float
    omega21: float
    gamma10: float
    gamma21: float
    gamma10_nr: float = 0.0
    gamma_phi: float = 0.0

    def __post_init__(self):
        for name in ("omega10", "omega21", "gamma10", "gamma21", "gamma10_nr", "gamma_phi"):
            _check_finite(name, getattr(self, name))
        if self.omega10 <= 0 or self.omega21 <= 0:
            raise ValueError("transition frequencies must be positive")
        for name in ("gamma10", "gamma21", "gamma10_nr", "gamma_phi"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")

    @classmethod
    def device(cls) -> "SystemParams":
        """Device values of the transmon characterised in the experiment."""
        return cls(
            omega10=7.558,
            omega21=7.070,
            gamma10=0.040,
            gamma21=0.080,
            gamma10_nr=0.0005,
            gamma_phi=0.001,
        )

    @property
    def omega20(self) -> float:
        return self.omega10 + self.omega21

    @property
    def anharmonicity(self) -> float:
        return self.omega21 - self.omega10

    def ideal(self) -> "SystemParams":
        """Copy with nonradiative decay and pure dephasing switched off."""
        return replace(self, gamma10_nr=0.0, gamma_phi=0.0)

    def two_level(self) -> "SystemParams":
        """Copy with the 2 -> 1 transition removed (exact two-level emitter)."""
        return replace(self, gamma21=0.0)

    def to_dict(self) -> dict:
        return {
            "omega10": self.omega10,
            "omega21": self.omega21,
            "gamma10": self.gamma10,
            "gamma21": self.gamma21,
            "gamma10_nr": self.gamma10_nr,
            "gamma_phi": self.gamma_phi,
        }


@dataclass(frozen=True)
class PowerCalibration:
    """Maps drive power at the emitter (dBm) to the Rabi frequency (GHz).

    The Rabi frequency scales with the field amplitude, so
    ``rabi10(P) = anchor_rabi10 * 10 ** ((P - anchor_dbm) / 20)``.
    """

    anchor_dbm: float = -110.0
    anchor_rabi10: float = 0.113

    def __post_init__(self):
        _check_finite("anchor_dbm", self.anchor_dbm)
        _check_finite("anchor_rabi10", self.anchor_rabi10)
        if self.anchor_rabi10 <= 0:
            raise ValueError("anchor_rabi10 must be positive")

    def rabi10(self, power_dbm):
        return self.anchor_rabi10 * 10.0 ** ((np.asarray(power_dbm, dtype=float) - self.anchor_dbm) / 20.0)

    def dbm(self, rabi10):
        return self.anchor_dbm + 20.0 * np.log10(np.asarray(rabi10, dtype=float) / self.anchor_rabi10)


@dataclass(frozen=True)
class DriveConfig:
    """Strong drive tone.

    Parameters
    ----------
    omega_d : float
        Drive frequency in GHz.
    amplitude_mode : {"rabi10", "field", "dbm"}
        How ``value`` is to be read: the 0-1 Rabi frequency ``sqrt(gamma10) E``
        in GHz, the field amplitude ``E`` in sqrt(rad/ns), or the power at
        the emitter in dBm (requires ``calibration``).
    value : float
    calibration : PowerCalibration, optional
    """

    omega_d: float
    amplitude_mode: AmplitudeMode = "rabi10"
    value: float = 0.0
    calibration: Optional[PowerCalibration] = None

    def __post_init__(self):
        _check_finite("omega_d", self.omega_d)
        _check_finite("value", self.value)
        if self.omega_d <= 0:
            raise ValueError("drive frequency must be positive")
        if self.amplitude_mode not in ("rabi10", "field", "dbm"):
            raise ValueError(f"unknown amplitude mode {self.amplitude_mode!r}")
        if self.amplitude_mode == "dbm" and self.calibration is None:
            raise ValueError("dbm amplitude mode needs a PowerCalibration")
        if self.amplitude_mode != "dbm" and self.value < 0:
            raise ValueError("drive amplitude must be non-negative")

    @classmethod
    def from_rabi10(cls, omega_d: float, rabi10: float, calibration=None) -> "DriveConfig":
        return cls(omega_d, "rabi10", float(rabi10), calibration)

    def rabi10(self, params: SystemParams) -> float:
        """0-1 Rabi frequency ``sqrt(gamma10) E`` in GHz."""
        if self.amplitude_mode == "rabi10":
            return self.value
        if self.amplitude_mode == "dbm":
            return float(self.calibration.rabi10(self.value))
        return to_cycles(math.sqrt(to_angular(params.gamma10)) * self.value)

    def rabi21(self, params: SystemParams) -> float:
        return to_cycles(math.sqrt(to_angular(params.gamma21)) * self.field(params))

    def field(self, params: SystemParams) -> float:
        """Drive amplitude ``E`` in sqrt(rad/ns)."""
        if self.amplitude_mode == "field":
            return self.value
        if params.gamma10 == 0:
            raise ValueError("field amplitude is undefined when gamma10 == 0")
        return to_angular(self.rabi10(params)) / math.sqrt(to_angular(params.gamma10))

    def as_mode(self, mode: AmplitudeMode, params: SystemParams, calibration=None) -> "DriveConfig":
        """Same drive expressed in another amplitude mode."""
        calibration = calibration or self.calibration
        if mode == "rabi10":
            value = self.rabi10(params)
        elif mode == "field":
            value = self.field(params)
        elif mode == "dbm":
            if calibration is None:
                raise ValueError("dbm amplitude mode needs a PowerCalibration")
            value = float(calibration.dbm(self.rabi10(params)))
        else:
            raise ValueError(f"unknown amplitude mode {mode!r}")
        return DriveConfig(self.omega_d, mode, value, calibration)

    def with_rabi10(self, rabi10: float) -> "DriveConfig":
        return DriveConfig(self.omega_d, "rabi10", float(rabi10), self.calibration)

    def to_dict(self) -> dict:
        out = {"omega_d": self.omega_d, "amplitude_mode": self.amplitude_mode, "value": self.value}
        if self.calibration is not None:
            out["calibration"] = {
                "anchor_dbm": self.calibration.anchor_dbm,
                "anchor_rabi10": self.calibration.anchor_rabi10,
            }
        return out


@dataclass(frozen=True)
class ProbeConfig:
    """Weak probe tone; ``amplitude`` is ``F`` in sqrt(rad/ns)."""

    omega_p: float
    amplitude: float = 1e-3

    def __post_init__(self):
        _check_finite("omega_p", self.omega_p)
        _check_finite("amplitude", self.amplitude)
        if self.amplitude <= 0:
            raise ValueError("probe amplitude must be positive")

    @classmethod
    def weak(cls, omega_p: float, params: SystemParams, scale: float = 1e-3) -> "ProbeConfig":
        """Probe with ``F = scale * sqrt(gamma10)``, deep in the linear regime."""
        return cls(omega_p, scale * math.sqrt(to_angular(params.gamma10)))


@dataclass(frozen=True, eq=False)
class BasisMatrix:
    """A 3x3 complex matrix tagged with the basis it is expressed in."""

    data: np.ndarray
    basis: Basis = "bare"

    def __post_init__(self):
        arr = np.array(self.data, dtype=complex)
        if arr.shape != (DIM, DIM):
            raise ValueError(f"expected a 3x3 matrix, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        if self.basis not in ("bare", "dressed"):
            raise ValueError(f"unknown basis tag {self.basis!r}")

    def dag(self) -> "BasisMatrix":
        return BasisMatrix(self.data.conj().T, self.basis)

    def is_hermitian(self, atol: float = 1e-13) -> bool:
        return bool(np.max(np.abs(self.data - self.data.conj().T)) <= atol)

    def __array__(self, dtype=None, copy=None):
        return np.array(self.data, dtype=dtype)


def _rate(value_ghz: float) -> float:
    return to_angular(value_ghz)


def build_rotating_hamiltonian(params: SystemParams, drive: DriveConfig) -> BasisMatrix:
    """Rotating-frame emitter Hamiltonian in the bare basis (rad/ns).

    Diagonal: detunings ``0, omega10 - omega_d, omega20 - 2 omega_d``.
    Off-diagonal: the drive ``E (sigma_t + sigma_t^dag)``; the 0-2 entries
    vanish by parity.
    """
    e_field = drive.field(params)
    wd = to_angular(drive.omega_d)
    h = np.zeros((DIM, DIM), dtype=complex)
    h[1, 1] = to_angular(params.omega10) - wd
    h[2, 2] = to_angular(params.omega20) - 2.0 * wd
    g01 = e_field * math.sqrt(_rate(params.gamma10) / 2.0)
    g12 = e_field * math.sqrt(_rate(params.gamma21) / 2.0)
    h[0, 1] = h[1, 0] = g01
    h[1, 2] = h[2, 1] = g12
    return BasisMatrix(h, "bare")


def transition_dipole(params: SystemParams) -> BasisMatrix:
    """``sigma_t = sqrt(gamma10/2) |0><1| + sqrt(gamma21/2) |1><2|`` (bare basis)."""
    s = np.zeros((DIM, DIM), dtype=complex)
    s[0, 1] = math.sqrt(_rate(params.gamma10) / 2.0)
    s[1, 2] = math.sqrt(_rate(params.gamma21) / 2.0)
    return BasisMatrix(s, "bare")


def nonradiative_jump(params: SystemParams) -> np.ndarray:
    """Jump operator of 1 -> 0 nonradiative decay (rate ``gamma10_nr``)."""
    op = np.zeros((DIM, DIM), dtype=complex)
    op[0, 1] = math.sqrt(_rate(params.gamma10_nr))
    return op


def dephasing_jump(params: SystemParams) -> np.ndarray:
    """Jump operator of pure dephasing; damps the 0-1 coherence at ``gamma_phi``."""
    op = np.zeros((DIM, DIM), dtype=complex)
    op[1, 1] = math.sqrt(2.0 * _rate(params.gamma_phi))
    return op


def to_dressed(op: BasisMatrix, basis) -> BasisMatrix:
    """Express a bare-basis operator in the dressed basis ``U^dag A U``."""
    if op.basis != "bare":
        raise ValueError("operator is already in the dressed basis")
    u = basis.unitary
    return BasisMatrix(u.conj().T @ op.data @ u, "dressed")


def expectations_from_rho(rho) -> np.ndarray:
    """Flattened ``<sigma_{mu nu}>`` vector from a density matrix."""
    return np.asarray(rho, dtype=complex).T.reshape(DIM * DIM).copy()


def rho_from_expectations(x) -> np.ndarray:
    """Inverse of :func:`expectations_from_rho`."""
    return np.asarray(x, dtype=complex).reshape(DIM, DIM).T.copy()


def decay_tensor(jump) -> np.ndarray:
    """Heisenberg-picture relaxation tensor of one Lindblad jump operator.

    Row ``(mu, nu)`` holds the components of ``1/2 {L^dag L, sigma_{mu nu}} -
    L^dag sigma_{mu nu} L`` on ``sigma_{mu' nu'}``, so that
    ``<...> = T @ x`` with ``x`` an expectation vector.
    """
    l = np.asarray(jump, dtype=complex)
    ld = l.conj().T
    k = ld @ l
    eye = np.eye(DIM)
    # t[mu, nu, a, b]
    t = 0.5 * (np.einsum("am,nb->mnab", k, eye) + np.einsum("am,nb->mnab", eye, k))
    t -= np.einsum("am,nb->mnab", ld, l)
    return t.reshape(DIM * DIM, DIM * DIM)


def _operator_for(sigma_t: BasisMatrix, basis) -> np.ndarray:
    if basis is None:
        if sigma_t.basis != "bare":
            raise ValueError("sigma_t is in the dressed basis but no DressedBasis was given")
        return sigma_t.data
    if sigma_t.basis != "dressed":
        raise ValueError("sigma_t must be transformed to the dressed basis first")
    return sigma_t.data


def xi_tensor(sigma_t: BasisMatrix, basis=None) -> np.ndarray:
    """Radiative relaxation tensor ``xi_{mu nu, mu' nu'}`` as a 9x9 matrix.

    ``xi_{mu nu} = sigma sigma_t^dag sigma_t + sigma_t^dag sigma_t sigma
    - 2 sigma_t^dag sigma sigma_t``; entry ``[(mu, nu), (mu', nu')]`` is
    ``<mu'| xi_{mu nu} |nu'>``. With ``basis=None`` the bare basis is used.
    """
    s = _operator_for(sigma_t, basis)
    return decay_tensor(math.sqrt(2.0) * s)


def zeta_tensor(sigma_t: BasisMatrix, basis=None) -> np.ndarray:
    """Probe coupling tensor: components of ``[sigma_{mu nu}, sigma_t^dag]``."""
    s = _operator_for(sigma_t, basis)
    sd = s.conj().T
    eye = np.eye(DIM)
    z = np.einsum("am,nb->mnab", eye, sd) - np.einsum("am,nb->mnab", sd, eye)
    return z.reshape(DIM * DIM, DIM * DIM)


def nonideal_jumps(params: SystemParams) -> list:
    jumps = []
    if params.gamma10_nr > 0:
        jumps.append(nonradiative_jump(params))
    if params.gamma_phi > 0:
        jumps.append(dephasing_jump(params))
    return jumps
