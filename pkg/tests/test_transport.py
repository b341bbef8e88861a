import numpy as np
import pytest

from acre.chemistry import ModelParams
from acre.mesh import BoundaryCondition, Dirichlet, build_mesh
from acre.transport import apply_phase_floor, heat_step, solute_step, total_heat, total_ions

from conftest import layer_phi

P = ModelParams()


def test_solute_equilibrium_unchanged():
    m = build_mesh(6, 6)
    one = np.ones(36)
    c = solute_step(m, one, one, np.full(36, 0.3), P, 1e-3)
    assert np.abs(c - 0.3).max() < 1e-13
    phi = layer_phi(m)
    c = solute_step(m, phi, phi, np.full(36, 0.5), P, 1e-3)
    assert np.abs(c - 0.5).max() < 1e-13


def test_solute_single_cell_oracle():
    # hand solve: c_new = (phi_old c_old + (phi_new - phi_old) m_m) / phi_new
    m = build_mesh(1, 1)
    p = ModelParams(m_m=2.0)
    c = solute_step(m, np.array([0.8]), np.array([1.0]), np.array([0.3]), p, 0.1)
    assert c[0] == pytest.approx((1.0 * 0.3 + (0.8 - 1.0) * 2.0) / 0.8)
    # dissolution raises c when c_old < m_m
    c = solute_step(m, np.array([0.9]), np.array([0.8]), np.array([0.3]), p, 0.1)
    assert c[0] == pytest.approx((0.8 * 0.3 + 0.1 * 2.0) / 0.9)
    assert c[0] > 0.3


def test_solute_rejects_vanishing_phase():
    m = build_mesh(3, 3)
    with pytest.raises(ValueError, match="phase_floor"):
        solute_step(m, np.zeros(9), np.zeros(9), np.zeros(9), P, 1e-3)
    c = solute_step(m, np.zeros(9), np.zeros(9), np.full(9, 0.4), P, 1e-3, phase_floor=1e-3)
    assert np.all(np.isfinite(c))


def test_phase_floor():
    phi = np.array([0.0, 0.5, 1.0])
    assert apply_phase_floor(phi, 0.0) is phi
    assert np.array_equal(apply_phase_floor(phi, 0.1), [0.1, 0.5, 0.9])
    with pytest.raises(ValueError):
        apply_phase_floor(phi, 0.5)


def test_heat_independent_of_phase_when_properties_match():
    m = build_mesh(8, 8)
    p = ModelParams(k_f=1.0, k_m=1.0, cp_rho_f=1.0, cp_rho_m=1.0)
    T = heat_step(m, layer_phi(m, y0=0.3), layer_phi(m), np.full(64, 0.95), p, 1e-2)
    assert np.abs(T - 0.95).max() < 1e-13


def test_heat_single_cell_oracle():
    m = build_mesh(1, 1)
    p = ModelParams(cp_rho_f=1.0, cp_rho_m=2.0)
    T = heat_step(m, np.array([0.5]), np.array([1.0]), np.array([0.9]), p, 0.1)
    assert T[0] == pytest.approx(0.9 * 2.0 / 3.0)


def test_heat_relaxes_monotonically_to_dirichlet_value():
    m = build_mesh(20, 1)
    one = np.ones(20)
    bc = BoundaryCondition(left=Dirichlet(0.9))
    T = np.ones(20)
    prev_max = 1.0
    for _ in range(50):
        T = heat_step(m, one, one, T, P, 1e-2, bc)
        assert 0.9 - 1e-14 <= T.min() and T.max() <= prev_max + 1e-14
        assert np.all(np.diff(T) >= -1e-14)
        prev_max = T.max()
    assert T.max() < 0.99


def test_conservation_under_neumann():
    m = build_mesh(10, 10)
    rng = np.random.default_rng(3)
    phi_old = layer_phi(m)
    phi_new = layer_phi(m, y0=0.22)
    c_old = rng.uniform(0.2, 0.6, 100)
    T_old = rng.uniform(0.9, 1.0, 100)
    c_new = solute_step(m, phi_new, phi_old, c_old, P, 1e-3)
    T_new = heat_step(m, phi_new, phi_old, T_old, P, 1e-3)
    assert total_ions(m, phi_new, c_new, P) == pytest.approx(total_ions(m, phi_old, c_old, P), abs=1e-12)
    assert total_heat(m, phi_new, T_new, P) == pytest.approx(total_heat(m, phi_old, T_old, P), abs=1e-12)


def test_dirichlet_solute_stays_between_data():
    m = build_mesh(10, 10)
    phi = layer_phi(m)
    bc = BoundaryCondition(left=Dirichlet(0.25))
    c = np.full(100, 0.5)
    for _ in range(10):
        c = solute_step(m, phi, phi, c, P, 1e-3, bc)
        assert 0.25 - 1e-12 <= c.min() and c.max() <= 0.5 + 1e-12


def test_time_step_must_be_positive():
    m = build_mesh(2, 2)
    with pytest.raises(ValueError):
        solute_step(m, np.ones(4), np.ones(4), np.ones(4), P, 0.0)
    with pytest.raises(ValueError):
        heat_step(m, np.ones(4), np.ones(4), np.ones(4), P, -1.0)
