"""Time stepping: the phase-field-only drivers and the iterative phase/solute/heat coupling.

Per coupled time step the phase field is solved first (L-scheme, with the
rates frozen at the previous coupling iterate and a stabilization term
anchored at the previous phase-field iterate), then concentration, then
temperature. The loop ends once the phase-field increment between two
coupling iterations is below ``tol_coup``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .allen_cahn import (
    LSchemeConfig,
    LSchemeSolver,
    NonlinearReport,
    newton_step_conservative,
    newton_step_original,
)
from .chemistry import ModelParams
from .diagnostics import StepDiagnostics, reaction_integral, step_record
from .mesh import BoundaryCondition, Mesh, l2_norm
from .transport import heat_step, solute_step

# Phase-field-only approaches and the coupled model.
APPROACHES = ("newton-original", "newton-conservative", "lscheme", "coupled")
APPROACH_ALIASES = {"i": "newton-original", "ii": "newton-conservative", "iii": "lscheme"}


class ConvergenceFailure(RuntimeError):
    """A nonlinear or coupling solve did not converge; ``step`` is the failing step index."""

    def __init__(self, step: int, message: str, report=None):
        super().__init__(f"step {step}: {message}")
        self.step = step
        self.report = report


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    stabilization: float
    coupling_stabilization: float = 1e-4
    tol_l: float = 1e-13
    tol_coup: float = 1e-6
    max_coupling_iters: int = 50
    max_lscheme_iters: int = 200
    linear_rtol: float = 1e-12
    approach: str = "lscheme"
    mask_update: str = "step"

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be nonnegative")
        if self.stabilization < 0 or self.coupling_stabilization < 0:
            raise ValueError("stabilization parameters must be nonnegative")
        if not (self.tol_l > 0 and self.tol_coup > 0):
            raise ValueError("tolerances must be positive")
        if self.max_coupling_iters < 1 or self.max_lscheme_iters < 1:
            raise ValueError("iteration caps must be at least 1")
        approach = APPROACH_ALIASES.get(self.approach, self.approach)
        if approach not in APPROACHES:
            raise ValueError(f"unknown approach {self.approach!r}")
        object.__setattr__(self, "approach", approach)

    @property
    def n_steps(self) -> int:
        """Number of steps to reach ``t_end``; a trailing partial step counts as one."""
        n = self.t_end / self.dt
        return int(round(n)) if abs(n - round(n)) < 1e-9 * max(1.0, n) else int(math.ceil(n))

    def lscheme(self, coupled: bool) -> LSchemeConfig:
        return LSchemeConfig(
            stabilization=self.stabilization,
            coupling_stabilization=self.coupling_stabilization if coupled else 0.0,
            tol=self.tol_l,
            max_iters=self.max_lscheme_iters,
            linear_rtol=self.linear_rtol,
            mask_update=self.mask_update,
        )


@dataclass
class SimState:
    t: float
    step: int
    phi: np.ndarray
    c: np.ndarray
    T: np.ndarray

    def copy(self) -> "SimState":
        return SimState(self.t, self.step, self.phi.copy(), self.c.copy(), self.T.copy())


@dataclass
class Problem:
    """Everything a run needs besides the state."""

    mesh: Mesh
    params: ModelParams
    rate: Callable
    cfg: SolverConfig
    bc_c: BoundaryCondition = field(default_factory=BoundaryCondition)
    bc_T: BoundaryCondition = field(default_factory=BoundaryCondition)
    phase_floor: float = 0.0


@dataclass
class CouplingReport:
    coupling_iterations: int
    lscheme_iterations_per_coupling: list[int]
    converged: bool
    final_increment: float
    increments: list[float] = field(default_factory=list)
    c_increments: list[float] = field(default_factory=list)
    T_increments: list[float] = field(default_factory=list)
    lscheme_failed: bool = False


class _SolverCache:
    """One factorized L-scheme solver per distinct time step."""

    def __init__(self, problem: Problem):
        self.problem = problem
        self._solvers: dict[tuple[float, bool], LSchemeSolver] = {}

    def get(self, dt: float, coupled: bool) -> LSchemeSolver:
        key = (dt, coupled)
        if key not in self._solvers:
            pr = self.problem
            self._solvers[key] = LSchemeSolver(pr.mesh, pr.params, pr.cfg.lscheme(coupled), dt)
        return self._solvers[key]


def coupled_step(
    state: SimState,
    problem: Problem,
    dt: float | None = None,
    initial: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
    solver: LSchemeSolver | None = None,
) -> tuple[SimState, CouplingReport]:
    """Advance the coupled phase/solute/heat system by one step.

    Parameters
    ----------
    state : fields at level n.
    dt : step size, defaults to ``problem.cfg.dt``.
    initial : optional ``(phi, c, T)`` seeding the coupling iterations;
        defaults to the level-n fields.
    solver : factorized L-scheme solver for ``dt`` (built when omitted).
    """
    mesh, p, cfg = problem.mesh, problem.params, problem.cfg
    dt = cfg.dt if dt is None else dt
    if solver is None:
        solver = LSchemeSolver(mesh, p, cfg.lscheme(True), dt)
    if initial is None:
        phi_i, c_i, T_i = state.phi, state.c, state.T
    else:
        phi_i, c_i, T_i = (np.asarray(a, dtype=float) for a in initial)

    report = CouplingReport(0, [], False, math.inf)
    for i in range(1, cfg.max_coupling_iters + 1):
        f = problem.rate(T_i, c_i)
        phi_new, lrep = solver.step(state.phi, f, anchor=phi_i, initial=phi_i)
        report.coupling_iterations = i
        report.lscheme_iterations_per_coupling.append(lrep.iterations)
        if not lrep.converged:
            report.lscheme_failed = True
            report.final_increment = l2_norm(mesh, phi_new - phi_i)
            return SimState(state.t + dt, state.step + 1, phi_new, c_i, T_i), report
        c_new = solute_step(mesh, phi_new, state.phi, state.c, p, dt, problem.bc_c, problem.phase_floor)
        T_new = heat_step(mesh, phi_new, state.phi, state.T, p, dt, problem.bc_T)
        inc = l2_norm(mesh, phi_new - phi_i)
        report.increments.append(inc)
        report.c_increments.append(l2_norm(mesh, c_new - c_i))
        report.T_increments.append(l2_norm(mesh, T_new - T_i))
        report.final_increment = inc
        phi_i, c_i, T_i = phi_new, c_new, T_new
        if inc <= cfg.tol_coup:
            report.converged = True
            break
    return SimState(state.t + dt, state.step + 1, phi_i, c_i, T_i), report


def phase_step(
    state: SimState, problem: Problem, dt: float | None = None, solver: LSchemeSolver | None = None
) -> tuple[SimState, NonlinearReport]:
    """Advance only the phase field with the configured approach; ``c`` and ``T`` stay fixed."""
    mesh, p, cfg = problem.mesh, problem.params, problem.cfg
    dt = cfg.dt if dt is None else dt
    f = problem.rate(state.T, state.c)
    if cfg.approach == "lscheme":
        if solver is None:
            solver = LSchemeSolver(mesh, p, cfg.lscheme(False), dt)
        phi, rep = solver.step(state.phi, f)
    elif cfg.approach == "newton-conservative":
        phi, rep = newton_step_conservative(mesh, state.phi, f, p, dt, cfg.tol_l, cfg.max_lscheme_iters)
    elif cfg.approach == "newton-original":
        phi, rep = newton_step_original(mesh, state.phi, f, p, dt, cfg.tol_l, cfg.max_lscheme_iters)
    else:
        raise ValueError("phase_step does not handle the coupled approach")
    return SimState(state.t + dt, state.step + 1, phi, state.c, state.T), rep


def run_simulation(
    initial: SimState,
    problem: Problem,
    sink: Callable[[StepDiagnostics, SimState], None] | None = None,
    n_steps: int | None = None,
) -> tuple[SimState, list[StepDiagnostics]]:
    """Step from ``initial`` to ``cfg.t_end`` (or for ``n_steps`` steps).

    ``sink(diag, state)`` is called after every step. Raises
    :class:`ConvergenceFailure` carrying the index of the failing step.
    """
    cfg, mesh, p = problem.cfg, problem.mesh, problem.params
    total = cfg.n_steps if n_steps is None else n_steps
    cache = _SolverCache(problem)
    coupled = cfg.approach == "coupled"
    state = initial.copy()
    history: list[StepDiagnostics] = []
    for k in range(total):
        dt = cfg.dt
        if n_steps is None and k == total - 1:
            dt = min(cfg.dt, cfg.t_end - state.t) if cfg.t_end - state.t > 0 else cfg.dt
        step_no = state.step + 1
        reaction = reaction_integral(mesh, state.phi, state.T, state.c, p, dt, rate=problem.rate)
        needs_solver = coupled or cfg.approach == "lscheme"
        solver = cache.get(dt, coupled) if needs_solver else None
        if coupled:
            new, rep = coupled_step(state, problem, dt=dt, solver=solver)
            if not rep.converged:
                what = "L-scheme iterations" if rep.lscheme_failed else "coupling iterations"
                raise ConvergenceFailure(step_no, f"{what} did not converge", rep)
            diag = step_record(
                mesh, step_no, new.t, state.phi, new.phi, reaction, rep.coupling_iterations,
                rep.lscheme_iterations_per_coupling,
            )
        else:
            new, rep = phase_step(state, problem, dt=dt, solver=solver)
            if not rep.converged:
                raise ConvergenceFailure(step_no, f"{cfg.approach} iterations did not converge", rep)
            if cfg.approach == "lscheme":
                diag = step_record(mesh, step_no, new.t, state.phi, new.phi, reaction, 1, [rep.iterations])
            else:
                diag = step_record(mesh, step_no, new.t, state.phi, new.phi, reaction, 1, [], rep.iterations)
        # t = step * dt exactly, except for a truncated final step
        new.t = cfg.t_end if dt != cfg.dt else step_no * cfg.dt
        diag.t = new.t
        history.append(diag)
        state = new
        if sink is not None:
            sink(diag, state)
    return state, history


def dt_guidance(p: ModelParams, mg: float, dt: float | None = None, l_coup: float | None = None) -> str:
    """Describe the sufficient conditions for contraction of the coupling iterations.

    The constants involved (bounds on the nonlinearity and the
    solute/temperature stability constants) are not computable from the
    parameters, so the conditions are listed symbolically.
    """
    mg_txt = f"{mg:g}"
    lines = [
        "Sufficient conditions for contraction of the coupling iterations:",
        "  dt < 1 / (M_G' * (5 + E_c/2 + E_T/2))",
        "  L_coup > max{0, 10*M_G' - 2/dt}",
        "where M_G' bounds the rate-dependence of the phase-field nonlinearity and",
        "E_c, E_T bound the concentration and temperature errors by the phase-field error;",
        "they depend on C_c, C_T, T_M, phi_m, phi_M and are not evaluated here.",
        f"Using the L-scheme bound M_G = {mg_txt} in place of M_G':",
        f"  L_coup > max{{0, 10·{mg_txt} − 2/Δt}}",
    ]
    if dt is not None:
        value = 10.0 * mg - 2.0 / dt
        lines.append(f"  with dt = {dt:g}: 10·{mg_txt} − 2/{dt:g} = {value:g}")
        if value < 0:
            lines.append("  this is negative, so any L_coup > 0 is admissible under that bound")
        elif l_coup is not None:
            status = "satisfied" if l_coup > value else "not satisfied"
            lines.append(f"  L_coup = {l_coup:g}: {status}")
    lhs, rhs, ok = p.gamma_constraint()
    lines.append(
        f"Solute bound condition 4*gamma <= lam*k0/m_m: {lhs:g} <= {rhs:g} ({'satisfied' if ok else 'violated'})"
    )
    return "\n".join(lines)


__all__ = [
    "APPROACHES",
    "ConvergenceFailure",
    "CouplingReport",
    "Problem",
    "SimState",
    "SolverConfig",
    "coupled_step",
    "dt_guidance",
    "phase_step",
    "run_simulation",
]
