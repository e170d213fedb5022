import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ladderqed.core import TWO_PI, DriveConfig, SystemParams, build_rotating_hamiltonian, to_cycles
from ladderqed.dressed import (
    DEGENERACY_GAP,
    LABELS,
    diagonalize,
    dressed_basis,
    overlaps,
    sideband_frequencies,
)


def test_zero_drive_degenerate_pair_is_bare_aligned(device):
    basis = dressed_basis(device, DriveConfig.from_rabi10(device.omega20 / 2, 0.0))
    assert np.allclose(basis.energies, [0.0, 0.0, TWO_PI * 0.244], atol=1e-12)
    ov = overlaps(basis)
    # g = |0>, m = |2>, e = |1>
    assert np.array_equal(ov, np.array([[1.0, 0, 0], [0, 0, 1.0], [0, 1.0, 0]]))


@pytest.mark.parametrize("rabi", [1e-4, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0])
def test_middle_state_overlaps(device, rabi):
    basis = dressed_basis(device, DriveConfig.from_rabi10(device.omega20 / 2, rabi))
    assert np.allclose(overlaps(basis)[:, 1], [2 / 3, 0.0, 1 / 3], atol=1e-12)


def test_tie_break_below_degeneracy_gap(device):
    # the g-m splitting grows like rabi**2; below the gap threshold the
    # pair is treated as degenerate and snapped to bare states
    basis = dressed_basis(device, DriveConfig.from_rabi10(device.omega20 / 2, 1e-6))
    assert basis.energies[1] - basis.energies[0] < DEGENERACY_GAP
    assert np.allclose(overlaps(basis)[:, 1], [0.0, 0.0, 1.0], atol=1e-9)


def test_zero_drive_nondegenerate_is_permutation(device):
    ov = overlaps(dressed_basis(device, DriveConfig.from_rabi10(device.omega10, 0.0)))
    assert set(np.unique(ov)) <= {0.0, 1.0}
    assert np.array_equal(ov.sum(axis=0), np.ones(3))


def random_hermitian(rng):
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    return a + a.conj().T


def test_random_hermitian_residuals():
    rng = np.random.default_rng(5)
    worst_res = worst_unit = 0.0
    for _ in range(10_000):
        h = random_hermitian(rng) * 10.0
        b = diagonalize(h)
        worst_res = max(worst_res, b.residual(h))
        u = b.unitary
        worst_unit = max(worst_unit, np.max(np.abs(u.conj().T @ u - np.eye(3))))
        assert np.all(np.diff(b.energies) >= 0)
    assert worst_res < 1e-10
    assert worst_unit < 1e-12


@given(st.integers(0, 2**32 - 1))
def test_overlap_rows_and_columns_sum_to_one(seed):
    b = diagonalize(random_hermitian(np.random.default_rng(seed)))
    ov = overlaps(b)
    assert np.allclose(ov.sum(axis=0), 1.0, atol=1e-12)
    assert np.allclose(ov.sum(axis=1), 1.0, atol=1e-12)
    assert np.all((ov >= 0) & (ov <= 1 + 1e-12))


@given(st.integers(0, 2**32 - 1))
def test_gauge_largest_component_real_positive(seed):
    u = diagonalize(random_hermitian(np.random.default_rng(seed))).unitary
    for col in range(3):
        k = np.argmax(np.abs(u[:, col]))
        assert u[k, col].imag == 0 and u[k, col].real > 0


def test_diagonalize_rejects_bad_input():
    with pytest.raises(ValueError):
        diagonalize(np.array([[0, 1], [1, 0]]))
    with pytest.raises(ValueError):
        diagonalize(np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0]], dtype=complex))


def test_exact_triple_degeneracy_returns_identity():
    b = diagonalize(np.zeros((3, 3)))
    assert np.allclose(b.unitary, np.eye(3))


def test_index_labels(device):
    b = dressed_basis(device, DriveConfig.from_rabi10(7.3, 0.2))
    assert [b.index(l) for l in LABELS] == [0, 1, 2]
    assert b.index(2) == 2
    with pytest.raises(ValueError):
        b.index("x")
    with pytest.raises(ValueError):
        b.index(3)


def test_to_bare_inverts_to_dressed(device):
    b = dressed_basis(device, DriveConfig.from_rabi10(7.3, 0.4))
    op = random_hermitian(np.random.default_rng(1))
    assert np.allclose(b.to_bare(b.to_dressed(op)), op)


def test_sidebands_zero_drive(device):
    basis = dressed_basis(device, DriveConfig.from_rabi10(7.314, 0.0))
    table = sideband_frequencies(basis)
    assert len(table) == 6
    f = {(s.lower, s.upper): s.frequency for s in table}
    assert f[("g", "m")] == pytest.approx(7.314)
    assert f[("g", "e")] == pytest.approx(7.558)
    assert f[("m", "e")] == pytest.approx(7.558)
    assert f[("e", "g")] == pytest.approx(7.070)


@given(st.floats(0.0, 3.0), st.floats(6.5, 8.0))
def test_sideband_mirror_symmetry(rabi, omega_d):
    p = SystemParams.device()
    table = sideband_frequencies(dressed_basis(p, DriveConfig.from_rabi10(omega_d, rabi)))
    fr = table.frequencies
    for k in range(0, 6, 2):
        assert abs(fr[k] + fr[k + 1] - 2 * omega_d) < 1e-12
    assert abs(np.sum(fr - omega_d)) < 1e-12


def test_sideband_kinds_and_lookup(ideal):
    from ladderqed.steady import solve_stationary

    d = DriveConfig.from_rabi10(ideal.omega20 / 2, 0.5)
    st_ = solve_stationary(ideal, d)
    table = sideband_frequencies(st_.basis, st_.populations)
    assert table.lookup("m", "e").kind == "gain"
    assert table.lookup("e", "m").kind == "loss"
    with pytest.raises(KeyError):
        table.lookup("g", "g")


def test_sidebands_need_drive_frequency():
    b = diagonalize(np.diag([0.0, 1.0, 2.0]))
    with pytest.raises(ValueError):
        sideband_frequencies(b)
    assert sideband_frequencies(b, omega_d=7.0).lookup("g", "e").frequency == pytest.approx(7.0 + to_cycles(2.0))


def test_labels_sorted_along_sweep(device):
    prev = None
    for rabi in np.linspace(0, 1, 41):
        e = dressed_basis(device, DriveConfig.from_rabi10(device.omega20 / 2, rabi)).energies
        assert np.all(np.diff(e) >= -DEGENERACY_GAP)
        if prev is not None:
            # quasi-energies move continuously on a fine grid
            assert np.max(np.abs(e - prev)) < TWO_PI * 0.05
        prev = e


def test_frozen_energies(ideal):
    e = to_cycles(dressed_basis(ideal, DriveConfig.from_rabi10(ideal.omega20 / 2, 0.5)).energies)
    assert np.allclose(e, [-0.50240691860356557, 0.0, 0.74640691860356612], atol=1e-12)
