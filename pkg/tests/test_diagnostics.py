import numpy as np
import pytest

from acre.chemistry import ModelParams, constant_rate
from acre.diagnostics import (
    StepDiagnostics,
    conservation_audit,
    mineral_volume,
    phase_integral,
    reaction_integral,
    step_record,
)
from acre.mesh import build_mesh

from conftest import circle_phi


def test_mineral_volume_examples():
    m = build_mesh(100, 100)
    assert mineral_volume(m, np.ones(m.n_cells)) == 0.0
    x, y = m.centers
    square = np.where((abs(x - 0.5) < 0.25) & (abs(y - 0.5) < 0.25), 0.0, 1.0)
    assert mineral_volume(m, square) == pytest.approx(0.25, abs=1e-14)
    assert mineral_volume(m, circle_phi(m)) == pytest.approx(np.pi * 0.09, abs=0.01)


def test_complementarity():
    m = build_mesh(13, 7, (1.3, 0.7))
    phi = np.random.default_rng(0).uniform(0, 1, m.n_cells)
    assert mineral_volume(m, phi) + phase_integral(m, phi) == pytest.approx(m.domain_measure, rel=1e-14)


def test_reaction_integral_examples():
    m = build_mesh(10, 10)
    p = ModelParams(lam=0.05, m_m=1.0)
    one = np.ones(100)
    assert reaction_integral(m, np.full(100, 0.5), one, one, p, 1e-3, rate=constant_rate(0.0)) == 0.0
    sharp = np.where(np.arange(100) < 40, 0.0, 1.0)
    assert reaction_integral(m, sharp, one, one, p, 1e-3, rate=constant_rate(-0.3)) == 0.0
    val = reaction_integral(m, np.full(100, 0.5), one, one, p, 1e-3, rate=constant_rate(-0.1))
    assert val == pytest.approx(2e-3, rel=1e-12)
    # default closure is the Arrhenius rate: c = c_eq gives zero
    assert reaction_integral(m, np.full(100, 0.5), one, np.full(100, 0.5), p, 1e-3) == 0.0


def test_step_record_and_audit():
    m = build_mesh(2, 2)
    a = np.array([0.5, 0.5, 0.5, 0.5])
    b = np.array([0.6, 0.5, 0.5, 0.5])
    d = step_record(m, 1, 0.1, a, b, 0.025, coupling_iterations=2, lscheme=[5, 3])
    assert d.delta_phi_int == pytest.approx(0.025)
    assert d.conservation_residual == pytest.approx(0.0, abs=1e-15)
    d2 = step_record(m, 2, 0.2, b, b, 0.001, coupling_iterations=3, lscheme=[7, 3, 1])
    audit = conservation_audit([d, d2])
    assert audit.n_steps == 2
    assert audit.max_residual == pytest.approx(0.001)
    assert audit.mean_coupling == 2.5
    assert audit.mean_lscheme == pytest.approx(9.5)
    assert audit.lscheme_per_coupling == [6.0, 3.0, 1.0]
    assert np.isnan(audit.mean_newton)


def test_audit_of_empty_history():
    assert conservation_audit([]).n_steps == 0


def test_newton_counts_in_audit():
    h = [StepDiagnostics(i, 0.1 * i, 0.2, 0.8, 0.0, 0.0, 0.0, newton_iterations=n) for i, n in enumerate([3, 1, 2])]
    assert conservation_audit(h).mean_newton == 2.0
