import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_density_matrix
from ladderqed.core import (
    BasisMatrix,
    DriveConfig,
    PowerCalibration,
    ProbeConfig,
    SystemParams,
    TWO_PI,
    build_rotating_hamiltonian,
    decay_tensor,
    expectations_from_rho,
    rho_from_expectations,
    to_angular,
    to_cycles,
    transition_dipole,
    xi_tensor,
    zeta_tensor,
)

rates = st.floats(min_value=1e-4, max_value=0.5)
freqs = st.floats(min_value=1.0, max_value=12.0)


@st.composite
def params_st(draw):
    return SystemParams(draw(freqs), draw(freqs), draw(rates), draw(st.floats(0.0, 0.5)))


def test_device_values():
    p = SystemParams.device()
    assert (p.omega10, p.omega21, p.gamma10, p.gamma21) == (7.558, 7.070, 0.040, 0.080)
    assert (p.gamma10_nr, p.gamma_phi) == (0.0005, 0.001)
    assert p.omega20 / 2 == pytest.approx(7.314, abs=1e-12)


@pytest.mark.parametrize(
    "kw",
    [
        dict(gamma10=-0.01),
        dict(gamma21=-1.0),
        dict(gamma_phi=-1e-6),
        dict(omega10=0.0),
        dict(omega21=-3.0),
        dict(gamma10=float("nan")),
        dict(omega10=float("inf")),
    ],
)
def test_params_rejected(kw):
    base = dict(omega10=7.5, omega21=7.0, gamma10=0.04, gamma21=0.08)
    base.update(kw)
    with pytest.raises(ValueError):
        SystemParams(**base)


def test_negative_anharmonicity_allowed():
    p = SystemParams(5.0, 5.5, 0.01, 0.02)
    assert p.anharmonicity == pytest.approx(0.5)


def test_no_gamma20_field():
    assert "gamma20" not in SystemParams.__dataclass_fields__


@given(st.floats(min_value=-1e3, max_value=1e3))
def test_unit_round_trip(x):
    assert to_cycles(to_angular(x)) == pytest.approx(x, rel=1e-14, abs=1e-300)


def test_hamiltonian_zero_drive(device):
    h = build_rotating_hamiltonian(device, DriveConfig.from_rabi10(7.314, 0.0)).data
    expected = np.diag([0.0, TWO_PI * 0.244, 0.0])
    assert np.allclose(h, expected, atol=1e-12)
    assert h.dtype == complex


def test_hamiltonian_drive_elements(device):
    h = build_rotating_hamiltonian(device, DriveConfig.from_rabi10(7.0, 0.1)).data
    assert abs(h[0, 1]) == pytest.approx(TWO_PI * 0.1 / math.sqrt(2), rel=1e-13)
    assert abs(h[1, 2]) / abs(h[0, 1]) == pytest.approx(math.sqrt(2), rel=1e-13)
    assert h[1, 1].real == pytest.approx(TWO_PI * (7.558 - 7.0))
    assert h[2, 2].real == pytest.approx(TWO_PI * (7.558 + 7.070 - 14.0))


@given(params_st(), freqs, st.floats(0.0, 3.0))
def test_hamiltonian_hermitian_and_parity(p, omega_d, rabi):
    h = build_rotating_hamiltonian(p, DriveConfig.from_rabi10(omega_d, rabi))
    assert h.basis == "bare"
    assert np.array_equal(h.data, h.data.conj().T)
    assert h.data[0, 2] == 0 and h.data[2, 0] == 0
    s = transition_dipole(p).data
    assert s[0, 2] == 0 and s[2, 0] == 0


def test_transition_dipole_entries(device):
    s = transition_dipole(device).data
    assert s[0, 1] == pytest.approx(math.sqrt(TWO_PI * 0.020))
    assert s[1, 2] == pytest.approx(math.sqrt(TWO_PI * 0.040))
    assert np.count_nonzero(s) == 2
    sts = s.conj().T @ s
    assert np.allclose(sts, np.diag([0.0, TWO_PI * 0.020, TWO_PI * 0.040]))


def test_transition_dipole_two_level(device):
    s = transition_dipole(device.two_level()).data
    assert np.count_nonzero(s) == 1


@given(params_st(), st.sampled_from(["rabi10", "field", "dbm"]), st.floats(0.001, 2.0))
def test_drive_mode_round_trip(p, mode, rabi):
    cal = PowerCalibration()
    d = DriveConfig.from_rabi10(7.0, rabi, cal)
    back = d.as_mode(mode, p).as_mode("rabi10", p)
    assert back.value == pytest.approx(rabi, rel=1e-12)
    e = d.field(p)
    assert to_cycles(math.sqrt(to_angular(p.gamma10)) * e) == pytest.approx(rabi, rel=1e-12)
    assert d.rabi21(p) == pytest.approx(to_cycles(math.sqrt(to_angular(p.gamma21)) * e), rel=1e-12)


def test_drive_validation():
    with pytest.raises(ValueError):
        DriveConfig(7.0, "dbm", -110.0)
    with pytest.raises(ValueError):
        DriveConfig(7.0, "watts", 1.0)
    with pytest.raises(ValueError):
        DriveConfig(-1.0, "rabi10", 0.1)
    with pytest.raises(ValueError):
        DriveConfig(7.0, "rabi10", -0.1)


def test_calibration_anchor():
    cal = PowerCalibration(-110.0, 0.113)
    assert cal.rabi10(-110.0) == pytest.approx(0.113)
    assert cal.rabi10(-90.0) == pytest.approx(1.13)
    assert cal.dbm(0.0113) == pytest.approx(-130.0)
    with pytest.raises(ValueError):
        PowerCalibration(-110.0, 0.0)


def test_probe_config(device):
    pr = ProbeConfig.weak(7.5, device)
    assert pr.amplitude**2 == pytest.approx(1e-6 * TWO_PI * device.gamma10)
    with pytest.raises(ValueError):
        ProbeConfig(7.5, 0.0)


def test_basis_matrix_read_only():
    m = BasisMatrix(np.eye(3), "bare")
    with pytest.raises(ValueError):
        m.data[0, 0] = 2.0
    with pytest.raises(ValueError):
        BasisMatrix(np.eye(3), "rotated")
    with pytest.raises(ValueError):
        BasisMatrix(np.eye(2), "bare")


def test_expectation_convention():
    # <sigma_{mu nu}> = Tr(rho |mu><nu|) = rho[nu, mu]
    rho = random_density_matrix(np.random.default_rng(3))
    x = expectations_from_rho(rho)
    for mu in range(3):
        for nu in range(3):
            op = np.zeros((3, 3))
            op[mu, nu] = 1.0
            assert x[3 * mu + nu] == pytest.approx(np.trace(rho @ op), abs=1e-15)
    assert np.allclose(rho_from_expectations(x), rho)


def _xi_direct(sigma, mu, nu):
    op = np.zeros((3, 3), dtype=complex)
    op[mu, nu] = 1.0
    sd = sigma.conj().T
    return op @ sd @ sigma + sd @ sigma @ op - 2 * sd @ op @ sigma


def test_xi_contraction_matches_direct_products():
    rng = np.random.default_rng(11)
    p = SystemParams.device()
    sigma = transition_dipole(p)
    xi = xi_tensor(sigma)
    worst = 0.0
    for _ in range(1000):
        rho = random_density_matrix(rng)
        x = expectations_from_rho(rho)
        contracted = xi @ x
        for mu in range(3):
            for nu in range(3):
                direct = np.trace(rho @ _xi_direct(sigma.data, mu, nu))
                worst = max(worst, abs(direct - contracted[3 * mu + nu]))
    assert worst < 1e-12


def test_xi_two_level_entries():
    p = SystemParams(7.5, 7.0, 0.04, 0.0)
    xi = xi_tensor(transition_dipole(p)) / TWO_PI
    assert xi[1, 1] == pytest.approx(0.02)  # (0,1),(0,1)
    assert xi[0, 4] == pytest.approx(-0.04)  # (0,0),(1,1)
    assert xi[4, 4] == pytest.approx(0.04)


def test_xi_population_equations_at_zero_drive(device):
    xi = xi_tensor(transition_dipole(device)) / TWO_PI
    # d<s22>/dt = -g21 <s22>, d<s11>/dt = g21 <s22> - g10 <s11>
    assert -xi[8, 8] == pytest.approx(-0.08)
    assert -xi[4, 8] == pytest.approx(0.08)
    assert -xi[4, 4] == pytest.approx(-0.04)
    assert xi[8, 4] == pytest.approx(0.0)


def test_zeta_two_level_commutator():
    p = SystemParams(7.5, 7.0, 0.04, 0.0)
    z = zeta_tensor(transition_dipole(p))
    g = math.sqrt(TWO_PI * 0.04 / 2)
    row = z[1].reshape(3, 3)  # zeta_{01}
    assert np.allclose(row, np.diag([g, -g, 0.0]))


def test_zeta_homogeneous_in_sqrt_gamma(device):
    from dataclasses import replace

    z1 = zeta_tensor(transition_dipole(device))
    z4 = zeta_tensor(transition_dipole(replace(device, gamma10=4 * device.gamma10, gamma21=4 * device.gamma21)))
    assert np.allclose(z4, 2 * z1, rtol=1e-13, atol=0)


@given(st.integers(0, 2**32 - 1))
def test_zeta_matches_commutator(seed):
    rng = np.random.default_rng(seed)
    p = SystemParams.device()
    sigma = transition_dipole(p)
    z = zeta_tensor(sigma)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    m = a + a.conj().T
    x = expectations_from_rho(m)
    sd = sigma.data.conj().T
    for mu in range(3):
        for nu in range(3):
            op = np.zeros((3, 3), dtype=complex)
            op[mu, nu] = 1.0
            direct = np.trace(m @ (op @ sd - sd @ op))
            assert abs(direct - (z @ x)[3 * mu + nu]) < 1e-12 * max(1.0, np.abs(m).max())


def test_tensor_basis_mismatch(device):
    sigma = transition_dipole(device)
    dressed = BasisMatrix(sigma.data, "dressed")
    with pytest.raises(ValueError):
        xi_tensor(dressed)
    with pytest.raises(ValueError):
        zeta_tensor(dressed)


def test_decay_tensor_matches_xi(device):
    sigma = transition_dipole(device)
    assert np.allclose(decay_tensor(math.sqrt(2) * sigma.data), xi_tensor(sigma))
