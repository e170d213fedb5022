"""Weak-probe linear response and transmission of the driven emitter.

The probe enters from one side as ``<a_in> = F exp(i (omega_d - omega_p) t)``
in the drive frame. The component of ``<sigma_{mu nu}>`` oscillating at that
rate solves a 9x9 linear system; the transmitted field follows from
``a_out = a_in - i sigma_t``. Transmission is reported as is: the model has
no background, so experimental data must be divided by its own off-resonant
baseline before comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    DriveConfig,
    ProbeConfig,
    SystemParams,
    build_rotating_hamiltonian,
    nonideal_jumps,
    to_angular,
    to_dressed,
    transition_dipole,
    zeta_tensor,
)
from .dressed import LABELS, DressedBasis, diagonalize
from .steady import (
    POPULATION_INDICES,
    TRACE_ROW,
    SolverError,
    StationaryState,
    decoupled_levels,
    heisenberg_generator,
    lindblad_superoperator,
    relaxation_tensor,
    solve_square,
    stationary_from_basis,
)


@dataclass(frozen=True)
class TransmissionPoint:
    omega_p: float  # GHz
    t: complex
    drive_rabi10: float  # GHz


class ResponseModel:
    """Everything at fixed drive that the probe response needs.

    Building one costs a 3x3 eigensolve and one 9x9 solve; each probe
    frequency afterwards is a single 9x9 solve, so sweeps over the probe
    axis reuse an instance.
    """

    def __init__(self, params: SystemParams, drive: DriveConfig, nonideal: bool = False):
        self.params = params
        self.drive = drive
        self.nonideal = nonideal
        self.basis: DressedBasis = diagonalize(build_rotating_hamiltonian(params, drive), drive=drive)
        self.stationary: StationaryState = stationary_from_basis(params, self.basis, nonideal)
        self.sigma_t = to_dressed(transition_dipole(params), self.basis)
        self.generator = heisenberg_generator(params, self.basis, nonideal)
        # source term of the response equation per unit F: i zeta x_s
        self.source = 1j * (zeta_tensor(self.sigma_t, self.basis) @ self.stationary.vector)
        self.source[TRACE_ROW] = 0.0

    def _system(self, omega_p):
        shift = 1j * to_angular(np.asarray(omega_p, dtype=float) - self.drive.omega_d)
        a = self.generator[None, :, :] + shift[:, None, None] * np.eye(9)[None, :, :]
        a[:, TRACE_ROW, :] = 0.0
        a[:, TRACE_ROW, list(POPULATION_INDICES)] = 1.0
        return a

    def _constraint_rows(self):
        rows = []
        for level in decoupled_levels(self.params):
            proj = np.zeros((3, 3), dtype=complex)
            proj[level, level] = 1.0
            rows.append(self.basis.to_dressed(proj).reshape(9))
        return np.array(rows).reshape(-1, 9)

    def response_vectors(self, omega_p, amplitude: float = 1.0) -> np.ndarray:
        """``<sigma_{mu nu}>_L`` for each probe frequency, shape ``(n, 9)``."""
        omega_p = np.atleast_1d(np.asarray(omega_p, dtype=float))
        a = self._system(omega_p)
        b = np.broadcast_to(amplitude * self.source, (len(omega_p), 9))
        extra = self._constraint_rows()
        if len(extra):
            # decoupled levels keep zero population in the response as well
            out = np.empty((len(omega_p), 9), dtype=complex)
            pad = np.zeros(len(extra), dtype=complex)
            for k in range(len(omega_p)):
                out[k], *_ = np.linalg.lstsq(np.vstack([a[k], extra]), np.concatenate([b[k], pad]), rcond=None)
            return out
        try:
            return np.linalg.solve(a, b[..., None])[..., 0]
        except np.linalg.LinAlgError:
            out = np.empty((len(omega_p), 9), dtype=complex)
            for k in range(len(omega_p)):
                out[k], _ = solve_square(a[k], b[k], "probe response")
            return out

    def transmission(self, omega_p) -> np.ndarray:
        """Complex transmission at each probe frequency (GHz)."""
        x = self.response_vectors(omega_p, 1.0)
        return 1.0 - 1j * (x @ self.sigma_t.data.reshape(9))

    def self_transmission(self) -> complex:
        """Transmission of the drive tone; at zero drive, its weak-field limit."""
        e_field = self.drive.field(self.params)
        if e_field == 0:
            return complex(self.transmission([self.drive.omega_d])[0])
        expect = complex(self.sigma_t.data.reshape(9) @ self.stationary.vector)
        return 1.0 - 1j * expect / e_field

    def response_residual(self, omega_p, x) -> float:
        a = self.generator + 1j * to_angular(omega_p - self.drive.omega_d) * np.eye(9)
        rhs = 1j * (zeta_tensor(self.sigma_t, self.basis) @ self.stationary.vector)
        return float(np.max(np.abs(a @ x - rhs)))


def probe_response(
    params: SystemParams, drive: DriveConfig, omega_p: float, amplitude: float = 1.0, nonideal: bool = False
) -> dict:
    """Linear response ``<sigma_{mu nu}>_L`` to a probe of amplitude ``F``.

    Keys are dressed-label pairs. Results scale linearly with ``amplitude``.
    """
    if amplitude <= 0:
        raise ValueError("probe amplitude must be positive")
    model = ResponseModel(params, drive, nonideal)
    x = model.response_vectors([omega_p], amplitude)[0]
    residual = model.response_residual(omega_p, x / amplitude)
    scale = max(1.0, float(np.max(np.abs(x / amplitude))))
    if residual > 1e-8 * scale:
        raise SolverError(f"probe response residual {residual:.3g}")
    return {(LABELS[m], LABELS[n]): complex(x[3 * m + n]) for m in range(3) for n in range(3)}


def transmission(
    params: SystemParams, drive: DriveConfig, omega_p: float, nonideal: bool = False
) -> TransmissionPoint:
    """Probe transmission coefficient ``t = <a_out> / <a_in>`` at ``omega_p`` (GHz)."""
    model = ResponseModel(params, drive, nonideal)
    t = complex(model.transmission([omega_p])[0])
    return TransmissionPoint(omega_p, t, drive.rabi10(params))


def transmission_spectrum(params, drive, omega_p, nonideal: bool = False) -> np.ndarray:
    return ResponseModel(params, drive, nonideal).transmission(omega_p)


def sideband_transmission(
    params: SystemParams, drive: DriveConfig, mu, nu, nonideal: bool = False
) -> complex:
    """Isolated-resonance transmission on the ``|mu, N> -> |nu, N+1>`` sideband.

    ``t = 1 + |<mu|sigma_t|nu>|^2 (rho_nu,nu - rho_mu,mu) / xi_{mu nu, mu nu}``,
    valid when the sideband is well separated from the others.
    """
    model = ResponseModel(params, drive, nonideal)
    i, j = model.basis.index(mu), model.basis.index(nu)
    if i == j:
        raise ValueError("same-state sidebands are transparent; mu must differ from nu")
    relax = relaxation_tensor(params, model.basis, nonideal)
    damping = relax[3 * i + j, 3 * i + j]
    if damping.real <= 0:
        raise SolverError(f"non-positive coherence damping {damping:.3g}")
    pops = model.stationary.populations
    return complex(1.0 + abs(model.sigma_t.data[i, j]) ** 2 * (pops[j] - pops[i]) / damping)


def drive_self_transmission(params: SystemParams, drive: DriveConfig, nonideal: bool = False) -> complex:
    """Transmission of the drive tone itself, ``1 - i <sigma_t>_s / E``."""
    e_field = drive.field(params)
    if e_field == 0:
        raise ValueError("drive self-transmission is undefined at zero drive")
    return ResponseModel(params, drive, nonideal).self_transmission()


# ---------------------------------------------------------------------------
# two-tone oracle


def _rk4_period_maps(sup0, sup_plus, sup_minus, beat, h, n):
    """Step maps of RK4 over one beat period for ``L(t) = L0 + e^{i b t} L+ + e^{-i b t} L-``."""
    times = h * np.arange(n)

    def gen(t):
        ph = np.exp(1j * beat * t)[:, None, None]
        return sup0[None] + ph * sup_plus[None] + np.conj(ph) * sup_minus[None]

    eye = np.eye(sup0.shape[0], dtype=complex)[None]
    l1, l2, l3 = gen(times), gen(times + h / 2), gen(times + h)
    k1 = l1
    k2 = l2 @ (eye + (h / 2) * k1)
    k3 = l2 @ (eye + (h / 2) * k2)
    k4 = l3 @ (eye + h * k3)
    return eye + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _compose(maps):
    """``maps[-1] @ ... @ maps[0]`` by pairwise reduction."""
    maps = list(maps)
    arr = np.asarray(maps)
    while len(arr) > 1:
        if len(arr) % 2:
            last = arr[-1]
            arr = arr[:-1]
            paired = arr[1::2] @ arr[0::2]
            paired[-1] = last @ paired[-1]
            arr = paired
        else:
            arr = arr[1::2] @ arr[0::2]
    return arr[0]


@dataclass(frozen=True)
class OracleResult:
    t: complex
    components: tuple  # (c0, c_plus, c_minus) of <sigma_t>
    periods: int
    steps_per_period: int
    t_transient: float


def two_tone_oracle(
    params: SystemParams,
    drive: DriveConfig,
    probe: ProbeConfig,
    t_final: float | None = None,
    periods: int = 20,
    dt: float | None = None,
    nonideal: bool = False,
) -> OracleResult:
    """Probe transmission from direct integration of the driven master equation.

    The probe is added to the Hamiltonian as ``F e^{i b t} sigma_t^dag + h.c.``
    with ``b = omega_d - omega_p``; after a transient of ``t_final`` (rounded
    up to whole beat periods, default ``50 / gamma10``) ``<sigma_t>`` is
    recorded over ``periods`` beat periods and projected onto
    ``{1, e^{i b t}, e^{-i b t}}``.
    """
    beat = to_angular(drive.omega_d - probe.omega_p)
    if beat == 0:
        raise ValueError("probe coincides with the drive; the beat note cannot be demodulated")
    if periods < 1:
        raise ValueError("need at least one demodulation period")
    h_q = build_rotating_hamiltonian(params, drive).data
    jumps = [math.sqrt(2.0) * transition_dipole(params).data]
    if nonideal:
        jumps += nonideal_jumps(params)
    sup0 = lindblad_superoperator(h_q, jumps)
    s = transition_dipole(params).data
    f = probe.amplitude
    eye = np.eye(3)
    # -i[F e^{ibt} s^dag + F e^{-ibt} s, rho]
    sup_plus = -1j * f * (np.kron(s.conj().T, eye) - np.kron(eye, s.conj()))
    sup_minus = -1j * f * (np.kron(s, eye) - np.kron(eye, s.T))

    period = 2 * math.pi / abs(beat)
    if dt is None:
        dt = min(0.1 / float(np.linalg.norm(sup0, 2)), period / 8)
    n = max(8, int(math.ceil(period / dt)))
    h = period / n
    maps = _rk4_period_maps(sup0, sup_plus, sup_minus, beat, h, n)
    one_period = _compose(maps)

    if t_final is None:
        t_final = 50.0 / to_angular(params.gamma10)
    n_transient = max(1, int(math.ceil(t_final / period)))
    rho0 = np.zeros(9, dtype=complex)
    rho0[0] = 1.0
    vec = np.linalg.matrix_power(one_period, n_transient) @ rho0

    starts = np.empty((9, periods), dtype=complex)
    for k in range(periods):
        starts[:, k] = vec
        vec = one_period @ vec
    # sigma_t expectation: Tr(rho s) = sum_ab rho[a, b] s[b, a]
    readout = s.T.reshape(9)
    samples = np.empty((n, periods), dtype=complex)
    cur = starts
    for k in range(n):
        samples[k] = readout @ cur
        cur = maps[k] @ cur
    times = (n_transient * period) + h * (np.arange(n)[:, None] + n * np.arange(periods)[None, :])
    times = times.T.reshape(-1)
    values = samples.T.reshape(-1)
    design = np.stack([np.ones_like(times), np.exp(1j * beat * times), np.exp(-1j * beat * times)], axis=1)
    coef, *_ = np.linalg.lstsq(design, values.astype(complex), rcond=None)
    t = 1.0 - 1j * coef[1] / f
    return OracleResult(complex(t), tuple(complex(c) for c in coef), periods, n, n_transient * period)
