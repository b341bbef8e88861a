import numpy as np
import pytest

from acre.allen_cahn import (
    LSchemeConfig,
    LSchemeSolver,
    classify_cells,
    lscheme_step,
    newton_step_conservative,
    newton_step_original,
    nonlocal_sum,
    split_nonlinearity,
)
from acre.chemistry import ModelParams, double_well_prime, double_well_second, mg_bound
from acre.linalg import SolverBreakdown, check_finite
from acre.mesh import assemble_diffusion, build_mesh, integrate

from conftest import circle_phi, layer_phi


def test_nonlocal_sum_examples():
    m = build_mesh(4, 4)
    n = m.n_cells
    allimp = np.ones(n, bool)
    assert nonlocal_sum(m, np.zeros(n), allimp, np.zeros(n)) == 0.0
    assert nonlocal_sum(m, np.ones(n), allimp, np.ones(n)) == 0.0
    assert nonlocal_sum(m, np.full(n, 0.25), allimp, np.zeros(n)) == pytest.approx(1.5)
    mask = np.arange(n) % 2 == 0
    assert nonlocal_sum(m, np.full(n, 0.5), mask, np.full(n, 0.5)) == 0.0
    # explicit cells take the old values
    assert nonlocal_sum(m, np.full(n, 0.25), np.zeros(n, bool), np.zeros(n)) == 0.0


def test_classify_uniform_field_all_implicit():
    m = build_mesh(5, 5)
    p = ModelParams(gamma=0.1)
    assert classify_cells(m, np.full(25, 0.3), 0.0, p).all()


def test_classify_blob():
    m = build_mesh(10, 10)
    p = ModelParams(gamma=0.1)
    phi = np.ones(100)
    blob = np.zeros(100, bool)
    blob[[44, 45, 54, 55]] = True
    phi[blob] = 0.5
    mask = classify_cells(m, phi, 0.0, p)
    assert not mask[blob].any()
    assert mask[~blob].all()


def test_classify_single_cell_follows_reaction_sign():
    m = build_mesh(1, 1)
    p = ModelParams(gamma=1e-6)
    # -(4/lam) f (1 - 2 phi) with f < 0: positive for phi < 1/2, negative above
    assert not classify_cells(m, np.array([0.2]), -0.1, p)[0]
    assert classify_cells(m, np.array([0.8]), -0.1, p)[0]


def test_config_validation():
    with pytest.raises(ValueError):
        LSchemeConfig(stabilization=-1.0)
    with pytest.raises(ValueError):
        LSchemeConfig(stabilization=1.0, tol=0.0)
    with pytest.raises(ValueError):
        LSchemeConfig(stabilization=1.0, max_iters=0)
    with pytest.raises(ValueError):
        LSchemeConfig(stabilization=1.0, mask_update="never")


def test_fluid_everywhere_is_a_fixed_point():
    m = build_mesh(8, 8)
    p = ModelParams(gamma=1.0)
    phi, rep = lscheme_step(m, np.ones(64), 0.0, p, LSchemeConfig(mg_bound(p, 0.0)), 1e-4)
    assert rep.converged and rep.iterations == 1
    assert np.abs(phi - 1.0).max() < 1e-14


def test_anchor_required_with_coupling_stabilization():
    m = build_mesh(4, 4)
    p = ModelParams()
    s = LSchemeSolver(m, p, LSchemeConfig(10.0, coupling_stabilization=1.0), 1e-3)
    with pytest.raises(ValueError, match="anchor"):
        s.step(np.ones(16), 0.0)


def test_step_conserves_phase_up_to_tolerance(dissolving):
    m, p, f, dt = dissolving
    tol = 1e-13
    s = LSchemeSolver(m, p, LSchemeConfig(mg_bound(p, 0.1), tol=tol), dt)
    phi = circle_phi(m)
    for _ in range(5):
        new, rep = s.step(phi, f)
        assert rep.converged
        assert abs(rep.conservation_residual) <= 10 * tol
        phi = new


def test_no_reaction_preserves_volume(dissolving):
    m, p, _, dt = dissolving
    s = LSchemeSolver(m, p, LSchemeConfig(mg_bound(p, 0.0), tol=1e-13), dt)
    phi = circle_phi(m)
    v0 = integrate(m, phi)
    for _ in range(10):
        phi, rep = s.step(phi, 0.0)
        assert abs(integrate(m, phi) - v0) <= 10 * 1e-13 * 10


def test_nonconvergence_is_reported(dissolving):
    m, p, f, dt = dissolving
    phi, rep = lscheme_step(m, circle_phi(m), f, p, LSchemeConfig(mg_bound(p, 0.1), max_iters=2), dt)
    assert not rep.converged and rep.iterations == 2
    assert rep.final_increment > 1e-13


def test_iteration_mask_mode_counts_flips(dissolving):
    m, p, f, dt = dissolving
    cfg = LSchemeConfig(mg_bound(p, 0.1), mask_update="iteration", max_iters=30)
    _, rep = lscheme_step(m, circle_phi(m), f, p, cfg, dt)
    assert rep.mask_flip_count >= 0
    _, rep_step = lscheme_step(m, circle_phi(m), f, p, LSchemeConfig(mg_bound(p, 0.1)), dt)
    assert rep_step.mask_flip_count == 0


def test_check_finite_guard():
    with pytest.raises(SolverBreakdown):
        check_finite(np.array([1.0, np.inf]), "test")


def _fixed_mask_residual(m, phi, phi_old, mask, f, p, dt):
    lap = assemble_diffusion(m, 1.0).matrix
    G, _ = split_nonlinearity(m, phi, phi_old, mask, f, p)
    return (phi - phi_old) / dt - p.gamma * (lap @ phi) - G


def test_matches_brute_force_newton_on_8x8():
    # independent oracle: dense Newton with a finite-difference Jacobian
    # applied to the split semi-implicit system with the same cell mask
    m = build_mesh(8, 8)
    p = ModelParams(lam=0.25, gamma=0.1)
    f, dt = -0.1, 1e-3
    phi_old = circle_phi(m, lam=0.25, r0=0.3)
    mask = classify_cells(m, phi_old, f, p)
    assert mask.any() and not mask.all()
    phi = phi_old.copy()
    h = 1e-7
    for _ in range(30):
        r = _fixed_mask_residual(m, phi, phi_old, mask, f, p, dt)
        J = np.empty((64, 64))
        for k in range(64):
            e = np.zeros(64)
            e[k] = h
            J[:, k] = (
                _fixed_mask_residual(m, phi + e, phi_old, mask, f, p, dt)
                - _fixed_mask_residual(m, phi - e, phi_old, mask, f, p, dt)
            ) / (2 * h)
        delta = np.linalg.solve(J, -r)
        phi = phi + delta
        if np.abs(delta).max() < 1e-15:
            break
    got, rep = lscheme_step(m, phi_old, f, p, LSchemeConfig(mg_bound(p, 0.1), tol=1e-13), dt)
    assert rep.converged
    assert np.abs(got - phi).max() < 1e-10


def test_sherman_morrison_matches_dense_jacobian():
    m = build_mesh(6, 6)
    p = ModelParams(lam=0.3, gamma=0.5)
    dt, f = 1e-2, -0.2
    phi_old = circle_phi(m, lam=0.3, r0=0.25)
    lap = assemble_diffusion(m, 1.0).matrix.toarray()
    s = p.gamma / p.lam**2
    n = m.n_cells

    def residual(phi):
        avg = m.cell_measure * np.sum(double_well_prime(phi)) / m.domain_measure
        return (
            (phi - phi_old) / dt + s * double_well_prime(phi) - p.gamma * lap @ phi
            + (4 / p.lam) * phi * (1 - phi) * f / p.m_m - s * avg
        )

    phi = phi_old.copy()
    for _ in range(20):
        diag = 1 / dt + s * double_well_second(phi) + (4 / p.lam) * (1 - 2 * phi) * f / p.m_m
        J = np.diag(diag) - p.gamma * lap - s / m.domain_measure * np.outer(np.ones(n), m.cell_measure * double_well_second(phi))
        d = np.linalg.solve(J, -residual(phi))
        phi += d
        if np.sqrt(m.cell_measure * d @ d) < 1e-14:
            break
    got, rep = newton_step_conservative(m, phi_old, f, p, dt, tol=1e-13)
    assert rep.converged and rep.iterations <= 6
    assert np.abs(got - phi).max() < 1e-11


def test_newton_conservative_keeps_volume_without_reaction():
    m = build_mesh(30, 30)
    p = ModelParams(lam=0.1, gamma=1.0)
    phi = circle_phi(m, lam=0.1)
    v0 = integrate(m, phi)
    for _ in range(5):
        phi, rep = newton_step_conservative(m, phi, 0.0, p, 1e-4)
        assert rep.converged
    assert abs(integrate(m, phi) - v0) < 1e-12


def test_newton_original_loses_volume_under_curvature():
    m = build_mesh(30, 30)
    p = ModelParams(lam=0.1, gamma=1.0)
    phi = circle_phi(m, lam=0.1)
    v0 = integrate(m, phi)
    for _ in range(5):
        phi, rep = newton_step_original(m, phi, 0.0, p, 1e-3)
        assert rep.converged
    # curvature shrinks the mineral, so the fluid fraction grows
    assert integrate(m, phi) - v0 > 1e-4


def test_tanh_profile_is_stationary_for_newton():
    m = build_mesh(200, 1)
    p = ModelParams(lam=0.05, gamma=1.0)
    x, _ = m.centers
    exact = 1.0 / (1.0 + np.exp(4.0 * (0.5 - x) / p.lam))
    # the continuous profile is an O(h^2) perturbation of the discrete steady state
    phi, rep = newton_step_original(m, exact, 0.0, p, 1e-4, tol=1e-7)
    assert rep.converged and rep.iterations <= 2
    for _ in range(200):
        phi, rep = newton_step_original(m, phi, 0.0, p, 1e-3, tol=1e-12)
    assert np.abs(phi - exact).max() < 2 * m.hx


def test_split_nonlinearity_uses_old_values_in_explicit_cells():
    m = build_mesh(3, 1)
    p = ModelParams()
    phi = np.array([0.2, 0.4, 0.6])
    old = np.array([0.1, 0.3, 0.9])
    mask = np.array([True, False, True])
    _, mixed = split_nonlinearity(m, phi, old, mask, 0.0, p)
    assert np.array_equal(mixed, [0.2, 0.3, 0.6])
