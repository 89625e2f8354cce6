import math

import numpy as np
import pytest

from tripod_gauge import units
from tripod_gauge.tripod import (
    PROJECTOR_M,
    DegenerateConfigurationError,
    TripodConfig,
    bare_hamiltonian,
    connection_omega_t,
    coupling_row,
    dark_basis,
    gauge_potentials,
    generator_commutator_norm,
    phase_connection,
    scalar_gap,
)

SQ3 = math.sqrt(3.0)


@pytest.fixture
def cfg():
    return TripodConfig.strontium(450.0)


def test_units_and_presets():
    k = units.wavenumber()
    assert k == pytest.approx(2 * math.pi / 0.689)
    w_r = units.recoil_frequency(k)
    # hbar k^2 / 2M evaluated independently in SI units
    hbar, amu = 1.054571817e-34, 1.66053906660e-27
    oracle = hbar * (2 * math.pi / 689e-9) ** 2 / (2 * 86.9088775 * amu) * 1e-6
    assert w_r == pytest.approx(oracle, rel=1e-9)
    assert units.rad_per_us_to_khz(w_r) == pytest.approx(4.836, abs=2e-3)
    assert units.recoil_temperature_uK(w_r) == pytest.approx(0.23, abs=0.005)
    v = units.thermal_velocity(0.5)
    assert v == pytest.approx(6.9e-3, rel=0.01)
    assert units.temperature_from_velocity(v) == pytest.approx(0.5, rel=1e-12)
    with pytest.raises(ValueError):
        units.thermal_velocity(-1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        TripodConfig(k=-1.0)
    with pytest.raises(ValueError):
        TripodConfig(rabi=(1.0, -1.0, 1.0))
    with pytest.raises(ValueError):
        TripodConfig(recoil=0.0)
    with pytest.raises(ValueError):
        TripodConfig(directions=((1, 0, 0), (0, 2, 0), (1, 0, 0)))


def test_zero_coupling_hamiltonian(cfg):
    h = bare_hamiltonian(cfg.replace(rabi=(0.0, 0.0, 0.0)), r=(1.0, 2.0, 3.0))
    assert np.all(h == 0)


def test_bright_splitting(cfg):
    h = bare_hamiltonian(cfg, r=(0.3, -0.1, 0.2))
    w = np.sort(np.linalg.eigvalsh(h))
    omega = cfg.rabi[0]
    assert np.allclose(w, [-SQ3 / 2 * omega, 0, 0, SQ3 / 2 * omega], atol=1e-12)
    assert units.rad_per_us_to_khz(SQ3 * omega) == pytest.approx(779.4, abs=0.1)


def test_dark_states_annihilated(cfg):
    rng = np.random.default_rng(0)
    for _ in range(10):
        r = rng.normal(size=3)
        phi = rng.uniform(0, 2 * math.pi, 2)
        frame = dark_basis(cfg, r, *phi)
        h = bare_hamiltonian(cfg, r, phases=phi)
        assert np.max(np.abs(h @ frame.d1)) < 1e-12
        assert np.max(np.abs(h @ frame.d2)) < 1e-12


def test_equal_rabi_frame_is_textbook(cfg):
    f = dark_basis(cfg)
    assert np.allclose(f.d1, np.array([1, -1, 0, 0]) / math.sqrt(2), atol=1e-15)
    assert np.allclose(f.d2, np.array([1, 1, -2, 0]) / math.sqrt(6), atol=1e-15)


def test_null_space_on_phase_grid(cfg):
    worst = 0.0
    for p1 in np.linspace(0, 2 * math.pi, 16, endpoint=False):
        for p2 in np.linspace(0, 2 * math.pi, 16, endpoint=False):
            f = dark_basis(cfg, phi1=p1, phi2=p2)
            row = coupling_row(cfg, phi1=p1, phi2=p2)
            worst = max(worst, np.max(np.abs(f.vectors[:, :3] @ row)))
            gram = np.conj(f.vectors) @ f.vectors.T
            assert np.max(np.abs(gram - np.eye(2))) < 1e-12
            assert np.all(f.vectors[:, 3] == 0)
    assert worst < 1e-12


def test_imbalanced_frame():
    cfg = TripodConfig.strontium(450.0, rabi_scale=(1.0, 1.1, 1.0))
    f = dark_basis(cfg, r=(0.2, 0.4, 0.0), phi1=0.3, phi2=1.1)
    row = coupling_row(cfg, r=(0.2, 0.4, 0.0), phi1=0.3, phi2=1.1)
    assert np.max(np.abs(f.vectors[:, :3] @ row)) < 1e-12
    assert np.max(np.abs(np.conj(f.vectors) @ f.vectors.T - np.eye(2))) < 1e-12


def test_common_phase_offset_leaves_frame(cfg):
    a = dark_basis(cfg.replace(offset_phases=(0.1, 0.5, 0.2)))
    b = dark_basis(cfg.replace(offset_phases=(1.1, 1.5, 1.2)))
    assert np.max(np.abs(a.vectors - b.vectors)) < 1e-15


def test_degenerate_configuration(cfg):
    with pytest.raises(DegenerateConfigurationError):
        dark_basis(cfg.replace(rabi=(0.0, 0.0, 0.0)))
    # one coupled beam still leaves a 2-dimensional dark space
    f = dark_basis(cfg.replace(rabi=(0.0, 0.0, 1.0)))
    assert np.max(np.abs(np.conj(f.vectors) @ f.vectors.T - np.eye(2))) < 1e-15


def test_connection_examples():
    assert np.all(connection_omega_t(0.0, 0.0) == 0)
    g = 0.7
    assert np.allclose(connection_omega_t(g, g), g * np.diag([1, 1 / 3]), atol=1e-15)
    assert np.allclose(connection_omega_t(g, 0.0),
                       g / 2 * np.array([[1, 1 / SQ3], [1 / SQ3, 1 / 3]]), atol=1e-15)
    assert np.allclose(connection_omega_t(3 * g, -g), 3 * connection_omega_t(g, -g / 3))
    assert generator_commutator_norm() > 0.1


def test_connection_from_frame_derivative(cfg):
    """i <D_j | dD_k/dphi> by finite differences of the frame equals the generators."""
    c1, c2 = phase_connection(cfg)
    h = 1e-6
    f0 = dark_basis(cfg, phi1=0.4, phi2=0.9).vectors
    for c, (dp1, dp2) in ((c1, (h, 0)), (c2, (0, h))):
        fp = dark_basis(cfg, phi1=0.4 + dp1, phi2=0.9 + dp2).vectors
        fm = dark_basis(cfg, phi1=0.4 - dp1, phi2=0.9 - dp2).vectors
        deriv = (fp - fm) / (2 * h)
        fd = 1j * np.conj(f0) @ deriv.T
        assert np.max(np.abs(fd - c)) < 1e-8
    assert np.allclose(c1, connection_omega_t(1.0, 0.0), atol=1e-15)
    assert np.allclose(c2, connection_omega_t(0.0, 1.0), atol=1e-15)


def test_projector_and_potential_closed_forms(cfg):
    assert np.allclose(PROJECTOR_M @ PROJECTOR_M, PROJECTOR_M, atol=1e-15)
    pot = gauge_potentials(cfg, method="closed")
    coeff = pot.A_sq_over_2m[0, 0].real / PROJECTOR_M[0, 0].real
    # |k2 - k1|^2 = 2 k^2 for orthogonal beams, so (8/9) omega_R
    assert coeff == pytest.approx(8 / 9 * cfg.recoil, rel=1e-12)
    assert np.allclose(pot.W, 4 / 9 * cfg.recoil * PROJECTOR_M, atol=1e-15)
    assert scalar_gap(pot) == pytest.approx(4 / 3 * cfg.recoil, rel=1e-12)


def test_finite_differences_match_closed_form(cfg):
    closed = gauge_potentials(cfg, method="closed")
    analytic = gauge_potentials(cfg, method="analytic")
    fd = gauge_potentials(cfg, method="fd")
    assert np.max(np.abs(fd.A - closed.A)) < 1e-6
    assert np.max(np.abs(fd.W - closed.W)) < 1e-6
    assert np.max(np.abs(fd.A_sq_over_2m - closed.A_sq_over_2m)) < 1e-6
    assert np.max(np.abs(analytic.A - closed.A)) < 1e-12
    assert fd.fd_residual < 1e-6


def test_co_propagating_beams_have_no_vector_potential(cfg):
    same = cfg.replace(directions=((1, 0, 0),) * 3)
    pot = gauge_potentials(same, method="analytic")
    assert np.max(np.abs(pot.A)) == 0
    assert np.max(np.abs(pot.W)) == 0


def test_unequal_rabi_uses_finite_differences():
    cfg = TripodConfig.strontium(450.0, rabi_scale=(1.0, 1.1, 1.0))
    pot = gauge_potentials(cfg)
    assert pot.method == "fd"
    ref = gauge_potentials(cfg, method="analytic")
    assert np.max(np.abs(pot.W - ref.W)) < 1e-6
    with pytest.raises(ValueError):
        gauge_potentials(cfg, method="closed")
