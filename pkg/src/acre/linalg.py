"""Reusable sparse solves for the symmetric positive-definite systems."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

# Above this many unknowns the direct factorization is replaced by CG.
DIRECT_LIMIT = 250_000


class SolverBreakdown(RuntimeError):
    """A linear or nonlinear solve produced non-finite values."""


def check_finite(x: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise SolverBreakdown(f"non-finite values after {what}")
    return x


class FactorizedSolver:
    """Factorize once, solve many right-hand sides.

    Falls back to Jacobi-preconditioned conjugate gradients for systems
    larger than ``direct_limit``.
    """

    def __init__(self, matrix, rtol: float = 1e-12, direct_limit: int = DIRECT_LIMIT):
        self.matrix = sp.csr_matrix(matrix)
        self.rtol = rtol
        n = self.matrix.shape[0]
        self.direct = n <= direct_limit
        if self.direct:
            self._lu = spla.splu(self.matrix.tocsc())
        else:
            self._precond = sp.diags(1.0 / self.matrix.diagonal())

    def __call__(self, rhs: np.ndarray, x0: np.ndarray | None = None) -> np.ndarray:
        if self.direct:
            x = self._lu.solve(rhs)
        else:
            x, info = spla.cg(self.matrix, rhs, x0=x0, rtol=self.rtol, atol=0.0, M=self._precond)
            if info != 0:
                raise SolverBreakdown(f"conjugate gradients did not converge (info={info})")
        return check_finite(x, "linear solve")


def solve_once(matrix, rhs: np.ndarray) -> np.ndarray:
    """Direct solve of a system used a single time (changing coefficients)."""
    x = spla.spsolve(sp.csc_matrix(matrix), rhs)
    return check_finite(np.asarray(x), "linear solve")
