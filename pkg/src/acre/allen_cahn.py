"""Time steps for the original and the conservative Allen-Cahn equation.

The production path is :class:`LSchemeSolver`: per control volume the
nonlinearity is assigned to its decreasing part (implicit, evaluated at the
current iterate) or its increasing part (explicit, evaluated at the old time
level), and the resulting fixed point is stabilized with ``L * (phi^{j+1} -
phi^j)``. The system matrix ``(1/dt + L + L_coup) I - gamma A`` never changes,
so it is factorized once per solver instance.

By default the cells are classified once per step from the old time level.
Reclassifying at every iterate (``mask_update="iteration"``) is available,
but cells near the sign change can then flip back and forth and the
iteration stalls in a cycle instead of converging.

The Newton solvers exist for validation against the fully implicit schemes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .chemistry import ModelParams, double_well_prime, double_well_second, g_derivative, g_nonlinearity
from .linalg import FactorizedSolver, SolverBreakdown, check_finite
from .mesh import Mesh, assemble_diffusion, l2_norm


@dataclass(frozen=True)
class LSchemeConfig:
    stabilization: float
    coupling_stabilization: float = 0.0
    tol: float = 1e-13
    max_iters: int = 200
    linear_rtol: float = 1e-12
    # "step": classify once at the old time level; "iteration": reclassify at every iterate
    mask_update: str = "step"

    def __post_init__(self):
        if self.stabilization < 0 or self.coupling_stabilization < 0:
            raise ValueError("stabilization parameters must be nonnegative")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.mask_update not in ("step", "iteration"):
            raise ValueError("mask_update must be 'step' or 'iteration'")


@dataclass
class NonlinearReport:
    iterations: int
    final_increment: float
    converged: bool
    mask_flip_count: int = 0
    increments: list[float] = field(default_factory=list)
    diverged: bool = False
    # sum_K |K| (phi^{n+1} - phi^n) + dt * sum_K |K| 4/lam phi(1-phi) f / m_m
    conservation_residual: float = float("nan")


def _reaction_source(phi, f, p: ModelParams):
    return (4.0 / p.lam) * phi * (1.0 - phi) * f / p.m_m


def nonlocal_sum(mesh: Mesh, phi: np.ndarray, implicit: np.ndarray, phi_old: np.ndarray) -> float:
    """``sum_J |J| P'(phi_J^l)`` with ``phi_J`` in implicit cells and ``phi_old_J`` elsewhere."""
    mixed = np.where(implicit, phi, phi_old)
    return float(mesh.cell_measure * np.sum(double_well_prime(mixed)))


def classify_cells(mesh: Mesh, phi: np.ndarray, f, p: ModelParams) -> np.ndarray:
    """Split mask: ``True`` (implicit) where dG/dphi <= 0, ``False`` (explicit) where it is positive."""
    avg = mesh.cell_measure * np.sum(phi * (1.0 - phi)) / mesh.domain_measure
    return g_derivative(phi, avg, f, p) <= 0.0


def split_nonlinearity(mesh: Mesh, phi: np.ndarray, phi_old: np.ndarray, implicit: np.ndarray, f, p: ModelParams):
    """Evaluate the split nonlinearity; returns ``(G, mixed_phi)``."""
    mixed = np.where(implicit, phi, phi_old)
    avg = mesh.cell_measure * np.sum(double_well_prime(mixed)) / mesh.domain_measure
    return g_nonlinearity(mixed, avg, f, p), mixed


class LSchemeSolver:
    """Element-wise split L-scheme for one fixed mesh, parameter set and time step."""

    def __init__(self, mesh: Mesh, p: ModelParams, cfg: LSchemeConfig, dt: float):
        if not dt > 0:
            raise ValueError("time step must be positive")
        self.mesh, self.p, self.cfg, self.dt = mesh, p, cfg, dt
        lap = assemble_diffusion(mesh, 1.0).matrix
        shift = 1.0 / dt + cfg.stabilization + cfg.coupling_stabilization
        self.matrix = (shift * sp.identity(mesh.n_cells, format="csr") - p.gamma * lap).tocsr()
        self._solve = FactorizedSolver(self.matrix, rtol=cfg.linear_rtol)

    def step(self, phi_old, f, anchor=None, initial=None) -> tuple[np.ndarray, NonlinearReport]:
        """Advance ``phi_old`` by one time step.

        Parameters
        ----------
        phi_old : phase field at the previous time level.
        f : net reaction rate per cell (or a scalar), held fixed during the solve.
        anchor : previous coupling iterate; required when the coupling
            stabilization is positive.
        initial : first iterate, defaults to ``phi_old``.
        """
        mesh, p, cfg, dt = self.mesh, self.p, self.cfg, self.dt
        phi_old = np.asarray(phi_old, dtype=float)
        f = np.broadcast_to(np.asarray(f, dtype=float), phi_old.shape)
        if cfg.coupling_stabilization > 0 and anchor is None:
            raise ValueError("an anchor field is required when coupling_stabilization > 0")
        phi = phi_old.copy() if initial is None else np.array(initial, dtype=float)
        base = phi_old / dt
        if cfg.coupling_stabilization > 0:
            base = base + cfg.coupling_stabilization * np.asarray(anchor, dtype=float)

        report = NonlinearReport(0, float("inf"), False)
        implicit = classify_cells(mesh, phi_old, f, p)
        mixed = phi
        for it in range(1, cfg.max_iters + 1):
            if cfg.mask_update == "iteration":
                prev_mask = implicit
                implicit = classify_cells(mesh, phi, f, p)
                report.mask_flip_count += int(np.count_nonzero(implicit != prev_mask))
            G, mixed = split_nonlinearity(mesh, phi, phi_old, implicit, f, p)
            new = self._solve(base + G + cfg.stabilization * phi, x0=phi)
            inc = l2_norm(mesh, new - phi)
            report.increments.append(inc)
            report.iterations = it
            report.final_increment = inc
            phi = new
            if inc <= cfg.tol:
                report.converged = True
                break
        report.conservation_residual = mesh.cell_measure * (
            np.sum(phi - phi_old) + dt * np.sum(_reaction_source(mixed, f, p))
        )
        return phi, report


def lscheme_step(mesh, phi_old, f, p, cfg: LSchemeConfig, dt, anchor=None, initial=None):
    """One-off L-scheme step; build an :class:`LSchemeSolver` to reuse the factorization."""
    return LSchemeSolver(mesh, p, cfg, dt).step(phi_old, f, anchor=anchor, initial=initial)


def _newton(mesh, phi_old, f, p, dt, tol, max_iters, conservative, initial=None):
    phi_old = np.asarray(phi_old, dtype=float)
    f = np.broadcast_to(np.asarray(f, dtype=float), phi_old.shape)
    n = mesh.n_cells
    lap = assemble_diffusion(mesh, 1.0).matrix
    s = p.gamma / p.lam**2
    # rank-one part of the conservative Jacobian: -(u v^T), u = s/|Omega| * 1, v_J = |J| P''(phi_J)
    u = np.full(n, s / mesh.domain_measure)

    phi = phi_old.copy() if initial is None else np.array(initial, dtype=float)
    report = NonlinearReport(0, float("inf"), False)
    growth = 0
    for it in range(1, max_iters + 1):
        residual = (phi - phi_old) / dt + s * double_well_prime(phi) - p.gamma * (lap @ phi) + _reaction_source(
            phi, f, p
        )
        diag = 1.0 / dt + s * double_well_second(phi) + (4.0 / p.lam) * (1.0 - 2.0 * phi) * f / p.m_m
        jac = (sp.diags(diag) - p.gamma * lap).tocsc()
        if conservative:
            residual -= s * mesh.cell_measure * np.sum(double_well_prime(phi)) / mesh.domain_measure
            lu = spla.splu(jac)
            y = lu.solve(-residual)
            z = lu.solve(u)
            v = mesh.cell_measure * double_well_second(phi)
            delta = y + z * (v @ y) / (1.0 - v @ z)
        else:
            delta = spla.spsolve(jac, -residual)
        check_finite(delta, "Newton update")
        phi = phi + delta
        inc = l2_norm(mesh, delta)
        if report.increments and inc > report.increments[-1]:
            growth += 1
        else:
            growth = 0
        report.increments.append(inc)
        report.iterations = it
        report.final_increment = inc
        if inc <= tol:
            report.converged = True
            break
        if growth >= 5:
            report.diverged = True
            break
    report.conservation_residual = mesh.cell_measure * (
        np.sum(phi - phi_old) + dt * np.sum(_reaction_source(phi, f, p))
    )
    return phi, report


def newton_step_original(mesh, phi_old, f, p, dt, tol=1e-13, max_iters=50, initial=None):
    """Backward-Euler step of the original (non-conservative) Allen-Cahn equation by Newton's method."""
    return _newton(mesh, phi_old, f, p, dt, tol, max_iters, conservative=False, initial=initial)


def newton_step_conservative(mesh, phi_old, f, p, dt, tol=1e-13, max_iters=50, initial=None):
    """Backward-Euler step of the conservative Allen-Cahn equation by Newton's method.

    The nonlocal average makes the Jacobian dense; it is the sparse local
    Jacobian minus a rank-one term, inverted with the Sherman-Morrison formula.
    """
    return _newton(mesh, phi_old, f, p, dt, tol, max_iters, conservative=True, initial=initial)


__all__ = [
    "LSchemeConfig",
    "LSchemeSolver",
    "NonlinearReport",
    "SolverBreakdown",
    "classify_cells",
    "lscheme_step",
    "newton_step_conservative",
    "newton_step_original",
    "nonlocal_sum",
    "split_nonlinearity",
]
