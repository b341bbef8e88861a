"""Backward-Euler solves for solute concentration and temperature with a known phase field.

Both equations are linear once ``phi`` is fixed; each step assembles one
sparse system and solves it directly.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .chemistry import ModelParams
from .linalg import solve_once
from .mesh import BoundaryCondition, Mesh, assemble_diffusion


def heat_capacity(phi, p: ModelParams):
    """Volumetric heat capacity ``phi cp_rho_f + (1 - phi) cp_rho_m``."""
    return phi * p.cp_rho_f + (1.0 - phi) * p.cp_rho_m


def conductivity(phi, p: ModelParams):
    return phi * p.k_f + (1.0 - phi) * p.k_m


def apply_phase_floor(phi: np.ndarray, floor: float) -> np.ndarray:
    """Clip ``phi`` into ``[floor, 1 - floor]``; ``floor = 0`` returns the input unchanged."""
    if floor <= 0:
        return phi
    if floor >= 0.5:
        raise ValueError("phase_floor must be below 0.5")
    return np.clip(phi, floor, 1.0 - floor)


def total_ions(mesh: Mesh, phi, c, p: ModelParams) -> float:
    """``sum_K |K| (phi c + (1 - phi) m_m)``: dissolved plus mineral-bound ions."""
    return float(mesh.cell_measure * np.sum(phi * c + (1.0 - phi) * p.m_m))


def total_heat(mesh: Mesh, phi, T, p: ModelParams) -> float:
    return float(mesh.cell_measure * np.sum(heat_capacity(phi, p) * T))


def solute_step(
    mesh: Mesh,
    phi_new,
    phi_old,
    c_old,
    p: ModelParams,
    dt: float,
    bc: BoundaryCondition | None = None,
    phase_floor: float = 0.0,
) -> np.ndarray:
    """Solve ``(phi c + (1-phi) m_m)^{new} - (...)^{old} = dt D div(phi_new grad c_new)``.

    Parameters
    ----------
    phi_new, phi_old : phase field at the new and old time level.
    c_old : concentration at the old time level.
    bc : boundary conditions for ``c`` (Neumann everywhere by default).
    phase_floor : optional regularization; ``phi`` entering the storage and
        diffusion terms is clipped to ``[floor, 1 - floor]``.

    Raises
    ------
    ValueError
        If the storage coefficient ``phi_new`` vanishes in a cell, which makes
        the system singular there.
    """
    if not dt > 0:
        raise ValueError("time step must be positive")
    phi_new = apply_phase_floor(np.asarray(phi_new, dtype=float), phase_floor)
    phi_old = apply_phase_floor(np.asarray(phi_old, dtype=float), phase_floor)
    c_old = np.asarray(c_old, dtype=float)
    if np.any(phi_new <= 0.0):
        raise ValueError(
            f"solute system is singular: phi_new <= 0 in {int(np.count_nonzero(phi_new <= 0))} cell(s);"
            " set phase_floor > 0"
        )
    op = assemble_diffusion(mesh, p.diffusivity * phi_new, bc)
    matrix = sp.diags(phi_new / dt) - op.matrix
    rhs = (phi_old * c_old + (phi_new - phi_old) * p.m_m) / dt + op.boundary
    return solve_once(matrix, rhs)


def heat_step(
    mesh: Mesh,
    phi_new,
    phi_old,
    T_old,
    p: ModelParams,
    dt: float,
    bc: BoundaryCondition | None = None,
) -> np.ndarray:
    """Solve ``(cp rho)_new T_new - (cp rho)_old T_old = dt div(k_new grad T_new)``."""
    if not dt > 0:
        raise ValueError("time step must be positive")
    phi_new = np.asarray(phi_new, dtype=float)
    phi_old = np.asarray(phi_old, dtype=float)
    cap_new = heat_capacity(phi_new, p)
    if np.any(cap_new <= 0.0):
        raise ValueError("heat capacity must be positive in every cell")
    op = assemble_diffusion(mesh, conductivity(phi_new, p), bc)
    matrix = sp.diags(cap_new / dt) - op.matrix
    rhs = heat_capacity(phi_old, p) * np.asarray(T_old, dtype=float) / dt + op.boundary
    return solve_once(matrix, rhs)


__all__ = [
    "apply_phase_floor",
    "conductivity",
    "heat_capacity",
    "heat_step",
    "solute_step",
    "total_heat",
    "total_ions",
]
