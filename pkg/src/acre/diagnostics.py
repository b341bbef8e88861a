"""Conservation audits and iteration bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chemistry import ModelParams, reaction_rate
from .mesh import Mesh


@dataclass
class StepDiagnostics:
    """One record per time step.

    ``delta_phi_int`` and ``reaction_integral`` describe the step from level
    ``n`` to ``n + 1``; ``mineral_volume`` and ``phi_int`` refer to the new level.
    """

    step: int
    t: float
    mineral_volume: float
    phi_int: float
    delta_phi_int: float
    reaction_integral: float
    conservation_residual: float
    coupling_iterations: int = 1
    lscheme_iterations: list[int] = field(default_factory=list)
    newton_iterations: int | None = None

    @property
    def lscheme_total(self) -> int:
        return int(sum(self.lscheme_iterations))


def mineral_volume(mesh: Mesh, phi) -> float:
    """``sum_K |K| (1 - phi_K)``."""
    return float(mesh.cell_measure * np.sum(1.0 - np.asarray(phi, dtype=float)))


def phase_integral(mesh: Mesh, phi) -> float:
    return float(mesh.cell_measure * np.sum(np.asarray(phi, dtype=float)))


def reaction_integral(mesh: Mesh, phi, T, c, p: ModelParams, dt: float, rate=None) -> float:
    """``dt * sum_K |K| (-4/lam) phi (1-phi) f(T, c) / m_m`` at a single time level.

    ``rate`` is a closure ``(T, c) -> f``; the Arrhenius rate is used when omitted.
    """
    phi = np.asarray(phi, dtype=float)
    f = rate(T, c) if rate is not None else reaction_rate(T, c, p)
    f = np.broadcast_to(np.asarray(f, dtype=float), phi.shape)
    return float(dt * mesh.cell_measure * np.sum(-(4.0 / p.lam) * phi * (1.0 - phi) * f / p.m_m))


def step_record(mesh, step, t, phi_old, phi_new, reaction, coupling_iterations=1, lscheme=(), newton=None):
    """Build a :class:`StepDiagnostics` from the two phase-field levels and the precomputed ``R^n``."""
    old_int = phase_integral(mesh, phi_old)
    new_int = phase_integral(mesh, phi_new)
    delta = new_int - old_int
    return StepDiagnostics(
        step=step,
        t=t,
        mineral_volume=mineral_volume(mesh, phi_new),
        phi_int=new_int,
        delta_phi_int=delta,
        reaction_integral=reaction,
        conservation_residual=abs(delta - reaction),
        coupling_iterations=coupling_iterations,
        lscheme_iterations=list(lscheme),
        newton_iterations=newton,
    )


@dataclass
class AuditReport:
    n_steps: int
    max_residual: float
    mean_coupling: float
    mean_lscheme: float
    # mean L-scheme count of the i-th coupling iteration over the steps that reached it
    lscheme_per_coupling: list[float]
    mean_newton: float
    volume_change: float


def conservation_audit(history: list[StepDiagnostics], initial_volume: float | None = None) -> AuditReport:
    """Summarize a run: worst conservation residual and the mean iteration counts."""
    if not history:
        return AuditReport(0, 0.0, math.nan, math.nan, [], math.nan, 0.0)
    residual = max(h.conservation_residual for h in history)
    coupling = float(np.mean([h.coupling_iterations for h in history]))
    totals = [h.lscheme_total for h in history if h.lscheme_iterations]
    lscheme = float(np.mean(totals)) if totals else math.nan
    depth = max(len(h.lscheme_iterations) for h in history)
    per_index = []
    for i in range(depth):
        vals = [h.lscheme_iterations[i] for h in history if len(h.lscheme_iterations) > i]
        per_index.append(float(np.mean(vals)))
    newton = [h.newton_iterations for h in history if h.newton_iterations is not None]
    newton_mean = float(np.mean(newton)) if newton else math.nan
    if initial_volume is None:
        first = history[0]
        initial_volume = first.mineral_volume + first.delta_phi_int
    return AuditReport(
        n_steps=len(history),
        max_residual=residual,
        mean_coupling=coupling,
        mean_lscheme=lscheme,
        lscheme_per_coupling=per_index,
        mean_newton=newton_mean,
        volume_change=history[-1].mineral_volume - initial_volume,
    )


__all__ = [
    "AuditReport",
    "StepDiagnostics",
    "conservation_audit",
    "mineral_volume",
    "phase_integral",
    "reaction_integral",
    "step_record",
]
