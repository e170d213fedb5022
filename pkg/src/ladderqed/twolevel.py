"""Two-level resonance fluorescence: Bloch steady state, closed-form drive
transmission and least-squares estimation of the emitter rates.

Rabi frequency convention
-------------------------
The Bloch equations here use ``Omega`` as the coefficient of ``i Omega / 2``,
i.e. the full Rabi frequency of the 0-1 transition. With the ladder
Hamiltonian coupling ``E sqrt(gamma10 / 2)`` this is ``sqrt(2) * rabi10`` where
``rabi10 = sqrt(gamma10) E`` is the drive-strength scalar used by the rest of
the package. :func:`bloch_rabi` does the conversion; the fit and the trace
synthesiser take powers/``rabi10`` and convert internally.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from .core import PowerCalibration, SystemParams, to_angular

TRACE_COLUMNS = ("power_dbm", "detuning_ghz", "re_t", "im_t")
FIT_NAMES = ("gamma10", "gamma10_nr", "gamma_phi", "omega10", "anchor_rabi10")
POWER_LADDER_DBM = tuple(-108.0 - 5.0 * k for k in range(8))


def bloch_rabi(rabi10):
    """Bloch-equation Rabi frequency (rad/ns) for a drive of ``rabi10`` GHz."""
    return math.sqrt(2.0) * to_angular(np.asarray(rabi10, dtype=float))


@dataclass(frozen=True)
class BlochRates:
    """Decay rates of the two-level model, rad/ns."""

    Gamma1: float
    Gamma1_tot: float
    Gamma2: float

    def __post_init__(self):
        if not self.Gamma1 > 0:
            raise ValueError("Gamma1 must be positive")
        if self.Gamma1_tot < self.Gamma1 or self.Gamma2 < self.Gamma1_tot / 2:
            raise ValueError("need Gamma2 >= Gamma1_tot / 2 >= Gamma1 / 2")

    @classmethod
    def from_params(cls, params: SystemParams) -> "BlochRates":
        g1 = to_angular(params.gamma10)
        g1tot = g1 + to_angular(params.gamma10_nr)
        return cls(g1, g1tot, g1tot / 2 + to_angular(params.gamma_phi))


def t_closed_form(rates: BlochRates, delta_omega, Omega_R):
    """Drive transmission of the two-level emitter.

    ``delta_omega = omega_d - omega10`` and ``Omega_R`` are angular; both
    broadcast.
    """
    x = np.asarray(delta_omega, dtype=float) / rates.Gamma2
    sat = np.asarray(Omega_R, dtype=float) ** 2 / (rates.Gamma1_tot * rates.Gamma2)
    return 1.0 - rates.Gamma1 / (2.0 * rates.Gamma2) * (1.0 + 1j * x) / (1.0 + x**2 + sat)


def bloch_steady(rates: BlochRates, delta_omega, Omega_R):
    """Stationary ``(<sigma_01>, <sigma_11>)`` of the two Bloch equations.

    Solves the linear system for ``(s, s*, n)`` directly, without using the
    closed-form transmission.
    """
    d = np.atleast_1d(np.asarray(delta_omega, dtype=float))
    om = np.atleast_1d(np.asarray(Omega_R, dtype=float))
    d, om = np.broadcast_arrays(d, om)
    n = d.size
    a = np.zeros((n, 3, 3), dtype=complex)
    b = np.zeros((n, 3), dtype=complex)
    g2, g1tot = rates.Gamma2, rates.Gamma1_tot
    dd, oo = d.reshape(-1), om.reshape(-1)
    # d s/dt = -(G2 - i d) s - i O/2 + i O n
    a[:, 0, 0] = -(g2 - 1j * dd)
    a[:, 0, 2] = 1j * oo
    b[:, 0] = 1j * oo / 2
    # conjugate equation
    a[:, 1, 1] = -(g2 + 1j * dd)
    a[:, 1, 2] = -1j * oo
    b[:, 1] = -1j * oo / 2
    # d n/dt = -G1tot n + i O/2 (s - s*)
    a[:, 2, 0] = 1j * oo / 2
    a[:, 2, 1] = -1j * oo / 2
    a[:, 2, 2] = -g1tot
    sol = np.linalg.solve(a, b[..., None])[..., 0]
    s01 = sol[:, 0].reshape(d.shape)
    n11 = sol[:, 2].real.reshape(d.shape)
    if np.ndim(delta_omega) == 0 and np.ndim(Omega_R) == 0:
        return complex(s01[0]), float(n11[0])
    return s01, n11


def t_from_bloch(rates: BlochRates, delta_omega, Omega_R):
    """``t = 1 - i Gamma1 <sigma_01> / Omega`` from :func:`bloch_steady`."""
    if np.any(np.asarray(Omega_R) <= 0):
        raise ValueError("transmission from the coherence needs Omega_R > 0")
    s01, _ = bloch_steady(rates, delta_omega, Omega_R)
    return 1.0 - 1j * rates.Gamma1 * np.asarray(s01) / np.asarray(Omega_R, dtype=float)


# ---------------------------------------------------------------------------
# traces


@dataclass
class TraceData:
    """Drive-transmission traces: one row per (power, detuning) sample.

    ``detuning_ghz`` is measured from a fixed reference frequency (the
    nominal qubit frequency), so the fitted ``omega10`` may move away from it.
    """

    power_dbm: np.ndarray
    detuning_ghz: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        self.power_dbm = np.asarray(self.power_dbm, dtype=float)
        self.detuning_ghz = np.asarray(self.detuning_ghz, dtype=float)
        self.t = np.asarray(self.t, dtype=complex)
        if not (self.power_dbm.shape == self.detuning_ghz.shape == self.t.shape):
            raise ValueError("trace columns must have equal length")

    def __len__(self):
        return self.t.size

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(TRACE_COLUMNS) + "\n")
        for p, d, t in zip(self.power_dbm, self.detuning_ghz, self.t):
            buf.write(f"{float(p)!r},{float(d)!r},{float(t.real)!r},{float(t.imag)!r}\n")
        return buf.getvalue()


def parse_traces(text: str, source: str = "<traces>") -> TraceData:
    """Parse delimited trace text (comma, tab or whitespace separated).

    A header naming the four columns is required; lines starting with '#'
    and blank lines are skipped.
    """
    rows = []
    header = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "," in line:
            fields = [f.strip() for f in next(csv.reader([line]))]
        else:
            fields = line.split()
        if header is None:
            header = fields
            if tuple(h.lower() for h in header) != TRACE_COLUMNS:
                raise ValueError(f"{source}:{lineno}: expected header {','.join(TRACE_COLUMNS)}, got {line!r}")
            continue
        if len(fields) != 4:
            raise ValueError(f"{source}:{lineno}: expected 4 columns, got {len(fields)}")
        try:
            rows.append([float(f) for f in fields])
        except ValueError:
            raise ValueError(f"{source}:{lineno}: non-numeric value in {line!r}") from None
    if header is None:
        raise ValueError(f"{source}: missing header row")
    arr = np.array(rows, dtype=float).reshape(-1, 4)
    return TraceData(arr[:, 0], arr[:, 1], arr[:, 2] + 1j * arr[:, 3])


def read_traces(path) -> TraceData:
    path = Path(path)
    return parse_traces(path.read_text(), str(path))


def model_traces(params: SystemParams, calibration: PowerCalibration, power_dbm, detuning_ghz, reference_ghz):
    rates = BlochRates.from_params(params)
    delta = to_angular(reference_ghz + np.asarray(detuning_ghz, dtype=float) - params.omega10)
    omega = bloch_rabi(calibration.rabi10(power_dbm))
    return t_closed_form(rates, delta, omega)


def synthesize_traces(
    params: SystemParams,
    calibration: PowerCalibration,
    powers: Sequence[float] = POWER_LADDER_DBM,
    detunings: Optional[Iterable[float]] = None,
    noise: float = 0.0,
    seed: Optional[int] = None,
    reference_ghz: Optional[float] = None,
) -> TraceData:
    """Synthetic drive-transmission traces with complex Gaussian noise.

    ``noise`` is the standard deviation of each quadrature. Defaults follow
    the characterisation protocol: eight powers from -108 dBm in 5 dB steps.
    """
    if detunings is None:
        detunings = np.linspace(-0.15, 0.15, 61)
    if reference_ghz is None:
        reference_ghz = params.omega10
    det = np.asarray(list(detunings), dtype=float)
    pw, dt = np.meshgrid(np.asarray(powers, dtype=float), det, indexing="ij")
    pw, dt = pw.reshape(-1), dt.reshape(-1)
    t = model_traces(params, calibration, pw, dt, reference_ghz)
    if noise > 0:
        rng = np.random.default_rng(seed)
        t = t + noise * (rng.standard_normal(t.shape) + 1j * rng.standard_normal(t.shape))
    return TraceData(pw, dt, t)


@dataclass
class FitResult:
    """Outcome of :func:`fit_traces`.

    ``covariance`` is 5x5 over ``FIT_NAMES``; rows and columns of held
    parameters are zero. ``chi2`` is the plain sum of squared complex
    residuals.
    """

    params: SystemParams
    calibration: PowerCalibration
    covariance: np.ndarray
    chi2: float
    n_points: int
    converged: bool = True
    fixed: tuple = ()
    reference_ghz: float = 0.0
    message: str = ""
    nfev: int = 0
    identifiable: bool = True
    vector: np.ndarray = field(default=None, repr=False)

    @property
    def stderr(self) -> dict:
        return {n: float(math.sqrt(max(self.covariance[i, i], 0.0))) for i, n in enumerate(FIT_NAMES)}

    def weak_resonant_t(self) -> complex:
        """Predicted on-resonance transmission in the zero-power limit."""
        return complex(t_closed_form(BlochRates.from_params(self.params), 0.0, 0.0))

    def report(self) -> str:
        w = 24
        lines = [
            f"{'points':<{w}}{self.n_points}",
            f"{'chi2':<{w}}{self.chi2:.6g}",
            f"{'converged':<{w}}{self.converged}",
        ]
        values = self.vector
        for i, name in enumerate(FIT_NAMES):
            tag = " (held)" if name in self.fixed else ""
            lines.append(f"{name:<{w}}{values[i]:.9g} +/- {self.stderr[name]:.3g} GHz{tag}")
        lines.append(f"{'anchor_dbm':<{w}}{self.calibration.anchor_dbm:.6g}")
        lines.append(f"{'|t| weak, on resonance':<{w}}{abs(self.weak_resonant_t()):.6g}")
        if not self.identifiable:
            lines.append("warning: design matrix is rank deficient; some parameters are not identifiable")
        return "\n".join(lines)


def _unpack(vector, template: SystemParams, anchor_dbm: float):
    g10, gnr, gphi, w10, anchor = vector
    params = SystemParams(
        omega10=w10,
        omega21=template.omega21,
        gamma10=g10,
        gamma21=template.gamma21,
        gamma10_nr=gnr,
        gamma_phi=gphi,
    )
    return params, PowerCalibration(anchor_dbm, anchor)


def fit_traces(
    data: TraceData,
    initial_guess: SystemParams,
    calibration_guess: PowerCalibration = PowerCalibration(),
    reference_ghz: Optional[float] = None,
    fixed: Sequence[str] = ("gamma10_nr",),
    max_iterations: int = 200,
    xtol: float = 1e-10,
) -> FitResult:
    """Least-squares fit of the closed-form transmission to complex traces.

    Amplitude and phase are fitted jointly (unweighted complex residuals).
    The closed form depends on ``gamma10_nr`` and the calibration anchor
    only through ``anchor**2 / (gamma10 + gamma10_nr)``, so one of them has
    to be held; by default ``gamma10_nr`` stays at its initial value.
    """
    if len(data) == 0:
        raise ValueError("no trace data")
    unknown = set(fixed) - set(FIT_NAMES)
    if unknown:
        raise ValueError(f"unknown parameter names in fixed: {sorted(unknown)}")
    powers = np.unique(data.power_dbm)
    if reference_ghz is None:
        reference_ghz = initial_guess.omega10
    anchor_dbm = calibration_guess.anchor_dbm

    start = np.array(
        [
            initial_guess.gamma10,
            initial_guess.gamma10_nr,
            initial_guess.gamma_phi,
            initial_guess.omega10,
            calibration_guess.anchor_rabi10,
        ]
    )
    free = [i for i, n in enumerate(FIT_NAMES) if n not in fixed]
    if len(powers) < 2 and "anchor_rabi10" not in fixed:
        # a single power cannot separate the calibration from the rates
        identifiable = False
    else:
        identifiable = True

    def full_vector(sub):
        v = start.copy()
        v[free] = sub
        return v

    def residuals(sub):
        params, cal = _unpack(full_vector(sub), initial_guess, anchor_dbm)
        diff = model_traces(params, cal, data.power_dbm, data.detuning_ghz, reference_ghz) - data.t
        return np.concatenate([diff.real, diff.imag])

    lower = np.array([1e-9, 0.0, 0.0, -np.inf, 1e-12])[free]
    upper = np.full(len(free), np.inf)
    x0 = np.clip(start[free], lower + 0.0, upper)
    # offsets of omega10 are tiny compared with its value; scale per parameter
    scale = np.array([0.01, 0.001, 0.001, 0.001, 0.01])[free]
    sol = least_squares(
        residuals,
        x0,
        bounds=(lower, upper),
        x_scale=scale,
        xtol=xtol,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=max_iterations,
        method="trf",
    )
    vec = full_vector(sol.x)
    params, cal = _unpack(vec, initial_guess, anchor_dbm)
    chi2 = float(np.sum(sol.fun**2))

    jac = sol.jac
    cov = np.zeros((5, 5))
    dof = max(1, sol.fun.size - len(free))
    jtj = jac.T @ jac
    rank = np.linalg.matrix_rank(jtj, tol=1e-10 * max(1e-300, np.max(np.abs(jtj))))
    if rank < len(free):
        identifiable = False
    sub_cov = np.linalg.pinv(jtj) * (chi2 / dof)
    sub_cov = 0.5 * (sub_cov + sub_cov.T)
    cov[np.ix_(free, free)] = sub_cov

    return FitResult(
        params=params,
        calibration=cal,
        covariance=cov,
        chi2=chi2,
        n_points=len(data),
        converged=bool(sol.status > 0),
        fixed=tuple(fixed),
        reference_ghz=reference_ghz,
        message=str(sol.message),
        nfev=int(sol.nfev),
        identifiable=identifiable,
        vector=vec,
    )
