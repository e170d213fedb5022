"""Stationary state of the driven ladder and a brute-force Lindblad oracle.

The stationary solver works on expectation vectors in the dressed basis,
where the coherent part of the Heisenberg equation is diagonal. The oracle
integrates the Schrodinger-picture master equation for ``rho`` in the bare
basis with fixed-step RK4 and shares no code with the solver beyond the
Hamiltonian and the jump operators.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    BasisMatrix,
    DriveConfig,
    SystemParams,
    build_rotating_hamiltonian,
    decay_tensor,
    nonideal_jumps,
    rho_from_expectations,
    to_angular,
    to_dressed,
    transition_dipole,
    xi_tensor,
)
from .dressed import LABELS, DressedBasis, diagonalize

log = logging.getLogger(__name__)

TRACE_ROW = 0  # the (g, g) population row is traded for the sum rule
POPULATION_INDICES = (0, 4, 8)


class SolverError(RuntimeError):
    """A linear system could not be solved to the required accuracy."""


class ConvergenceError(SolverError):
    """The oracle integrator did not converge under step halving."""


def transition_frequencies(basis: DressedBasis) -> np.ndarray:
    """``omega_mu - omega_nu`` flattened over ``(mu, nu)``."""
    e = basis.energies
    return (e[:, None] - e[None, :]).reshape(9)


def relaxation_tensor(params: SystemParams, basis: DressedBasis, nonideal: bool = False) -> np.ndarray:
    """Total Heisenberg relaxation tensor in the dressed basis.

    The radiative part is ``xi``; with ``nonideal`` the nonradiative decay
    and pure dephasing channels are added on top.
    """
    sigma_t = to_dressed(transition_dipole(params), basis)
    total = xi_tensor(sigma_t, basis)
    if nonideal:
        for jump in nonideal_jumps(params):
            total = total + decay_tensor(basis.to_dressed(jump))
    return total


def heisenberg_generator(params, basis, nonideal=False, xi_sign=1.0) -> np.ndarray:
    """``d x / dt = G x`` with ``G = i diag(omega_{mu nu}) - xi``."""
    relax = relaxation_tensor(params, basis, nonideal)
    return np.diag(1j * transition_frequencies(basis)) - xi_sign * relax


def solve_square(a: np.ndarray, b: np.ndarray, what: str = "system", cond_limit: float = 1e13):
    """Solve ``a x = b``; falls back to least squares on (near-)singular input.

    Returns ``(x, cond)``.
    """
    cond = float(np.linalg.cond(a))
    if math.isfinite(cond) and cond < cond_limit:
        return np.linalg.solve(a, b), cond
    log.warning("%s is ill-conditioned (cond=%.3g); using least squares", what, cond)
    x, *_ = np.linalg.lstsq(a, b, rcond=None)
    return x, cond


@dataclass(frozen=True, eq=False)
class StationaryState:
    """Stationary density matrix, in the dressed basis.

    ``vector`` is the flattened expectation vector ``<sigma_{mu nu}>_s``;
    ``residual`` is the largest stationarity defect ``|G x|``.
    """

    rho: BasisMatrix
    vector: np.ndarray
    residual: float
    condition: float
    basis: DressedBasis

    @property
    def expectations(self) -> dict:
        return {(LABELS[m], LABELS[n]): complex(self.vector[3 * m + n]) for m in range(3) for n in range(3)}

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.rho.data)).copy()

    @property
    def rho_bare(self) -> BasisMatrix:
        return BasisMatrix(self.basis.to_bare(self.rho.data), "bare")

    @property
    def purity(self) -> float:
        r = self.rho.data
        return float(np.real(np.trace(r @ r)))

    def max_offdiagonal(self) -> float:
        r = self.rho.data
        return float(np.max(np.abs(r - np.diag(np.diag(r)))))


def decoupled_levels(params: SystemParams) -> list:
    """Bare levels with no coupling to the ground state.

    With ``gamma21 == 0`` level 2 is neither driven nor damped, its
    population is conserved and the stationary problem has a
    two-dimensional kernel; the state reached from the ground state has
    that population at zero.
    """
    return [2] if params.gamma21 == 0 else []


def stationary_from_basis(params, basis, nonideal=False, xi_sign=1.0) -> StationaryState:
    gen = heisenberg_generator(params, basis, nonideal, xi_sign)
    trace_row = np.zeros(9, dtype=complex)
    trace_row[list(POPULATION_INDICES)] = 1.0
    decoupled = decoupled_levels(params)
    if not decoupled:
        a = gen.copy()
        a[TRACE_ROW, :] = trace_row
        b = np.zeros(9, dtype=complex)
        b[TRACE_ROW] = 1.0
        x, cond = solve_square(a, b, "stationary system")
    else:
        rows = [gen, trace_row[None, :]]
        for level in decoupled:
            proj = np.zeros((3, 3), dtype=complex)
            proj[level, level] = 1.0
            # <P> = Tr(rho P) = sum_{mu nu} P[mu, nu] x_{mu nu}
            rows.append(basis.to_dressed(proj).reshape(1, 9))
        a = np.vstack(rows)
        b = np.zeros(a.shape[0], dtype=complex)
        b[9] = 1.0
        x, *_ = np.linalg.lstsq(a, b, rcond=None)
        cond = float(np.linalg.cond(a))
    residual = float(max(np.max(np.abs(gen @ x)), abs(np.sum(x[list(POPULATION_INDICES)]) - 1.0)))
    rho = rho_from_expectations(x)
    return StationaryState(BasisMatrix(rho, "dressed"), x, residual, cond, basis)


def solve_stationary(
    params: SystemParams, drive: DriveConfig, nonideal: bool = False, xi_sign: float = 1.0
) -> StationaryState:
    """Stationary state of the driven emitter without probe.

    Assembles the 9x9 Heisenberg generator over ``<sigma_{mu nu}>`` in the
    dressed basis, replaces the ``(g, g)`` row by the trace sum rule and
    solves. ``xi_sign=-1`` flips the relaxation tensor and is only meant
    for negative-control checks.
    """
    basis = diagonalize(build_rotating_hamiltonian(params, drive), drive=drive)
    return stationary_from_basis(params, basis, nonideal, xi_sign)


# ---------------------------------------------------------------------------
# Lindblad oracle


def _jump_operators(params: SystemParams, nonideal: bool) -> list:
    jumps = [math.sqrt(2.0) * transition_dipole(params).data]
    if nonideal:
        jumps += nonideal_jumps(params)
    return jumps


def lindblad_superoperator(h, jumps) -> np.ndarray:
    """Row-major vectorised ``rho -> -i[H, rho] + sum_k D[L_k] rho``."""
    h = np.asarray(h, dtype=complex)
    n = h.shape[0]
    eye = np.eye(n)
    sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for l in jumps:
        l = np.asarray(l, dtype=complex)
        ldl = l.conj().T @ l
        sup += np.kron(l, l.conj()) - 0.5 * np.kron(ldl, eye) - 0.5 * np.kron(eye, ldl.T)
    return sup


def rk4_step_map(sup: np.ndarray, h: float) -> np.ndarray:
    """One classical RK4 step for a constant linear generator, as a matrix."""
    hl = h * sup
    eye = np.eye(sup.shape[0], dtype=complex)
    hl2 = hl @ hl
    hl3 = hl2 @ hl
    return eye + hl + hl2 / 2.0 + hl3 / 6.0 + (hl3 @ hl) / 24.0


def default_oracle_time(params: SystemParams) -> float:
    return 50.0 / to_angular(params.gamma10)


def default_oracle_step(sup: np.ndarray) -> float:
    return 0.1 / max(float(np.linalg.norm(sup, 2)), 1e-12)


def _propagate(sup, rho0, t_final, n_steps):
    step = rk4_step_map(sup, t_final / n_steps)
    vec = np.asarray(rho0, dtype=complex).reshape(-1)
    return (np.linalg.matrix_power(step, n_steps) @ vec).reshape(rho0.shape)


def evolve_oracle(
    params: SystemParams,
    drive: DriveConfig,
    rho0,
    t_final: float | None = None,
    dt: float | None = None,
    nonideal: bool = False,
    tol: float = 1e-8,
    max_halvings: int = 6,
    readout: str = "bare",
) -> BasisMatrix:
    """Integrate the master equation from ``rho0`` (bare basis) to ``t_final``.

    Fixed-step RK4; the step is halved until two successive results agree
    to ``tol``. ``t_final`` defaults to ``50 / gamma10``.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    h_q = build_rotating_hamiltonian(params, drive).data
    sup = lindblad_superoperator(h_q, _jump_operators(params, nonideal))
    if t_final is None:
        t_final = default_oracle_time(params)
    if dt is None:
        dt = default_oracle_step(sup)
    n_steps = max(1, int(math.ceil(t_final / dt)))

    prev = _propagate(sup, rho0, t_final, n_steps)
    for _ in range(max_halvings):
        n_steps *= 2
        cur = _propagate(sup, rho0, t_final, n_steps)
        if np.max(np.abs(cur - prev)) < tol:
            break
        prev = cur
    else:
        raise ConvergenceError(f"RK4 did not converge to {tol} after {max_halvings} halvings")

    drift = abs(np.trace(cur) - np.trace(rho0))
    if drift > 1e-9:
        raise ConvergenceError(f"trace drifted by {drift:.3g}")
    if readout == "dressed":
        basis = diagonalize(h_q, drive=drive)
        return BasisMatrix(basis.to_dressed(cur), "dressed")
    return BasisMatrix(cur, "bare")


def oracle_trajectory(
    params: SystemParams,
    drive: DriveConfig,
    rho0,
    times,
    dt: float | None = None,
    nonideal: bool = False,
) -> np.ndarray:
    """States (bare basis) at the requested, increasing sample ``times``."""
    rho0 = np.asarray(rho0, dtype=complex)
    sup = lindblad_superoperator(build_rotating_hamiltonian(params, drive).data, _jump_operators(params, nonideal))
    if dt is None:
        dt = default_oracle_step(sup)
    out = []
    vec = rho0.reshape(-1)
    t_prev = 0.0
    for t in times:
        span = t - t_prev
        if span < 0:
            raise ValueError("sample times must be increasing")
        if span > 0:
            n = max(1, int(math.ceil(span / dt)))
            vec = np.linalg.matrix_power(rk4_step_map(sup, span / n), n) @ vec
        out.append(vec.reshape(rho0.shape).copy())
        t_prev = t
    return np.array(out)
