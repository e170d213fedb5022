"""Dressed states of the rotating-frame Hamiltonian and their Rabi sidebands."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    BasisMatrix,
    DriveConfig,
    SystemParams,
    build_rotating_hamiltonian,
    to_cycles,
)

LABELS = ("g", "m", "e")
DEGENERACY_GAP = 1e-9  # rad/ns


@dataclass(frozen=True, eq=False)
class DressedBasis:
    """Sorted eigen-decomposition of the rotating-frame Hamiltonian.

    ``energies`` are in rad/ns, ascending (g, m, e). Column ``mu`` of
    ``unitary`` is the dressed state ``|mu>`` written in the bare basis.
    """

    energies: np.ndarray
    unitary: np.ndarray
    drive: Optional[DriveConfig] = None

    @property
    def labels(self):
        return LABELS

    def index(self, label) -> int:
        if isinstance(label, (int, np.integer)):
            if not 0 <= label < 3:
                raise ValueError(f"dressed index out of range: {label}")
            return int(label)
        try:
            return LABELS.index(label)
        except ValueError:
            raise ValueError(f"unknown dressed label {label!r}") from None

    def to_dressed(self, op) -> np.ndarray:
        op = np.asarray(op, dtype=complex)
        return self.unitary.conj().T @ op @ self.unitary

    def to_bare(self, op) -> np.ndarray:
        op = np.asarray(op, dtype=complex)
        return self.unitary @ op @ self.unitary.conj().T

    def residual(self, h) -> float:
        """``max |H U - U diag(E)|``."""
        h = np.asarray(h, dtype=complex)
        return float(np.max(np.abs(h @ self.unitary - self.unitary * self.energies)))


def _align_degenerate(vecs: np.ndarray) -> np.ndarray:
    """Rotate an orthonormal block of eigenvectors towards bare basis states.

    The bare states with the largest weight in the subspace are picked, then
    the rotation that brings the block closest to them (polar factor of the
    overlap matrix) is applied. Columns come out ordered by bare index.
    """
    k = vecs.shape[1]
    weights = np.sum(np.abs(vecs) ** 2, axis=1)
    # stable pick: prefer lower bare index on ties
    order = sorted(range(vecs.shape[0]), key=lambda j: (-round(weights[j], 12), j))
    picked = sorted(order[:k])
    overlap = vecs[picked, :].conj().T  # (k, k): <column|bare_j>^*
    x, _, yh = np.linalg.svd(overlap)
    return vecs @ (x @ yh)


def _fix_gauge(u: np.ndarray) -> np.ndarray:
    u = u.copy()
    for col in range(u.shape[1]):
        mags = np.abs(u[:, col])
        lead = int(np.flatnonzero(mags >= mags.max() - 1e-12)[0])
        u[:, col] *= np.conj(u[lead, col]) / mags[lead]
        u[lead, col] = mags[lead]
    return u


def diagonalize(h, drive: Optional[DriveConfig] = None) -> DressedBasis:
    """Dressed basis of a Hermitian 3x3 Hamiltonian.

    Eigenvalues are sorted ascending. Inside a degenerate subspace (gap below
    ``DEGENERACY_GAP``) the eigenvectors are rotated to line up with bare
    states; each column is then phased so its largest component is real and
    positive.
    """
    if isinstance(h, BasisMatrix):
        if h.basis != "bare":
            raise ValueError("diagonalize expects a bare-basis Hamiltonian")
        data = h.data
    else:
        data = np.asarray(h, dtype=complex)
    if data.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {data.shape}")
    scale = max(1.0, float(np.max(np.abs(data))))
    if np.max(np.abs(data - data.conj().T)) > 1e-12 * scale:
        raise ValueError("Hamiltonian is not Hermitian")
    energies, vecs = np.linalg.eigh(0.5 * (data + data.conj().T))

    start = 0
    while start < 3:
        stop = start + 1
        while stop < 3 and energies[stop] - energies[stop - 1] < DEGENERACY_GAP:
            stop += 1
        if stop - start > 1:
            vecs[:, start:stop] = _align_degenerate(vecs[:, start:stop])
        start = stop

    return DressedBasis(energies=energies, unitary=_fix_gauge(vecs), drive=drive)


def dressed_basis(params: SystemParams, drive: DriveConfig) -> DressedBasis:
    return diagonalize(build_rotating_hamiltonian(params, drive), drive=drive)


def overlaps(basis: DressedBasis) -> np.ndarray:
    """``|<j|mu>|^2`` with bare index ``j`` on rows, dressed ``mu`` on columns."""
    return np.abs(basis.unitary) ** 2


@dataclass(frozen=True)
class Sideband:
    lower: str
    upper: str
    frequency: float  # GHz
    kind: str = "unknown"  # gain | loss | unknown


# mirror pairs are adjacent
SIDEBAND_PAIRS = (("g", "m"), ("m", "g"), ("g", "e"), ("e", "g"), ("m", "e"), ("e", "m"))


class SidebandTable(tuple):
    """The six ``|mu, N> <-> |nu, N+1>`` probe resonances, mu != nu."""

    def lookup(self, lower: str, upper: str) -> Sideband:
        for sb in self:
            if sb.lower == lower and sb.upper == upper:
                return sb
        raise KeyError((lower, upper))

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([sb.frequency for sb in self])


def sideband_frequencies(basis: DressedBasis, populations=None, omega_d=None) -> SidebandTable:
    """Probe frequencies ``omega_d + omega_nu - omega_mu`` of the six sidebands.

    If dressed ``populations`` are given, each entry is classified as
    ``gain`` when the upper state is more populated than the lower one and
    ``loss`` otherwise.
    """
    if omega_d is None:
        if basis.drive is None:
            raise ValueError("basis carries no drive snapshot; pass omega_d")
        omega_d = basis.drive.omega_d
    rows = []
    for lower, upper in SIDEBAND_PAIRS:
        i, j = LABELS.index(lower), LABELS.index(upper)
        # compute each splitting once from the ordered pair so mirrors are exact negatives
        if i < j:
            shift = to_cycles(basis.energies[j] - basis.energies[i])
        else:
            shift = -to_cycles(basis.energies[i] - basis.energies[j])
        kind = "unknown"
        if populations is not None:
            diff = float(np.real(populations[j] - populations[i]))
            kind = "gain" if diff > 0 else "loss" if diff < 0 else "unknown"
        rows.append(Sideband(lower, upper, omega_d + shift, kind))
    return SidebandTable(rows)
