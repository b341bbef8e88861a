"""Uniform cell-centered finite-volume grids and two-point flux operators.

Cells are numbered row-major from the lower-left corner: cell ``(i, j)``
(``i`` along x, ``j`` along y) has index ``j * nx + i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

SIDES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class Neumann:
    """Homogeneous Neumann (zero normal flux) condition."""


@dataclass(frozen=True)
class Dirichlet:
    value: float


NEUMANN = Neumann()


@dataclass(frozen=True)
class BoundaryCondition:
    """One condition per side of the rectangle; unspecified sides are Neumann."""

    left: Neumann | Dirichlet = NEUMANN
    right: Neumann | Dirichlet = NEUMANN
    bottom: Neumann | Dirichlet = NEUMANN
    top: Neumann | Dirichlet = NEUMANN

    def __post_init__(self):
        for side in SIDES:
            cond = getattr(self, side)
            if not isinstance(cond, (Neumann, Dirichlet)):
                raise TypeError(f"{side}: expected Neumann or Dirichlet, got {cond!r}")
            if isinstance(cond, Dirichlet) and not np.isfinite(cond.value):
                raise ValueError(f"{side}: Dirichlet value must be finite")

    @classmethod
    def neumann(cls) -> "BoundaryCondition":
        return cls()

    def side(self, name: str) -> Neumann | Dirichlet:
        return getattr(self, name)

    @property
    def is_pure_neumann(self) -> bool:
        return all(isinstance(getattr(self, s), Neumann) for s in SIDES)


@dataclass(frozen=True)
class Field:
    """Cell-indexed scalar values together with their boundary conditions."""

    values: np.ndarray
    bc: BoundaryCondition = field(default_factory=BoundaryCondition)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("field values must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", values)

    def check_mesh(self, mesh: "Mesh") -> "Field":
        if self.values.size != mesh.n_cells:
            raise ValueError(f"field has {self.values.size} values, mesh has {mesh.n_cells} cells")
        return self


@dataclass(frozen=True)
class Mesh:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        for name in ("nx", "ny"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        for name in ("lx", "ly"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def cell_measure(self) -> float:
        return self.hx * self.hy

    @property
    def domain_measure(self) -> float:
        return self.lx * self.ly

    @property
    def shape(self) -> tuple[int, int]:
        """Shape for reshaping a cell vector into a (ny, nx) image."""
        return (self.ny, self.nx)

    def index(self, i: int, j: int) -> int:
        return j * self.nx + i

    @cached_property
    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        xx, yy = np.meshgrid(x, y)
        return xx.ravel(), yy.ravel()

    @cached_property
    def interior_edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Arrays ``(K, L, |sigma|, d)`` for every interior edge, each listed once with K < L."""
        idx = np.arange(self.n_cells).reshape(self.shape)
        kh, lh = idx[:, :-1].ravel(), idx[:, 1:].ravel()
        kv, lv = idx[:-1, :].ravel(), idx[1:, :].ravel()
        k = np.concatenate([kh, kv])
        l = np.concatenate([lh, lv])
        measure = np.concatenate([np.full(kh.size, self.hy), np.full(kv.size, self.hx)])
        dist = np.concatenate([np.full(kh.size, self.hx), np.full(kv.size, self.hy)])
        return k, l, measure, dist

    def boundary_cells(self, side: str) -> tuple[np.ndarray, float, float]:
        """Cells touching ``side`` with the edge measure and the center-to-edge distance."""
        idx = np.arange(self.n_cells).reshape(self.shape)
        if side == "left":
            return idx[:, 0].copy(), self.hy, self.hx / 2
        if side == "right":
            return idx[:, -1].copy(), self.hy, self.hx / 2
        if side == "bottom":
            return idx[0, :].copy(), self.hx, self.hy / 2
        if side == "top":
            return idx[-1, :].copy(), self.hx, self.hy / 2
        raise ValueError(f"unknown side {side!r}")

    def neighbors(self, k: int) -> list[tuple[int, float, float]]:
        """Neighbors of cell ``k`` as ``(L, |sigma_KL|, d_KL)`` tuples."""
        i, j = k % self.nx, k // self.nx
        out = []
        if i > 0:
            out.append((k - 1, self.hy, self.hx))
        if i < self.nx - 1:
            out.append((k + 1, self.hy, self.hx))
        if j > 0:
            out.append((k - self.nx, self.hx, self.hy))
        if j < self.ny - 1:
            out.append((k + self.nx, self.hx, self.hy))
        return out


def build_mesh(nx: int, ny: int, extents: tuple[float, float] = (1.0, 1.0)) -> Mesh:
    return Mesh(nx, ny, float(extents[0]), float(extents[1]))


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, Field) else np.asarray(u, dtype=float)


def two_point_flux(mesh: Mesh, u, k: int, l: int) -> float:
    """Two-point flux ``(u_L - u_K) / d_KL`` across the edge shared by K and L."""
    for nb, _, dist in mesh.neighbors(k):
        if nb == l:
            vals = _values(u)
            return (vals[l] - vals[k]) / dist
    raise ValueError(f"cells {k} and {l} are not neighbors")


def harmonic_mean(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Edge coefficient ``2ab/(a+b)``; zero when either side is zero."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = a + b
    out = np.zeros(np.broadcast(a, b).shape)
    np.divide(2.0 * a * b, s, out=out, where=s > 0)
    return out


@dataclass(frozen=True)
class DiffusionOperator:
    """Affine diffusion operator ``u -> matrix @ u + boundary``.

    ``boundary`` holds the Dirichlet contributions and vanishes for
    Neumann-only conditions.
    """

    matrix: sp.csr_matrix
    boundary: np.ndarray

    def __call__(self, u) -> np.ndarray:
        return self.matrix @ _values(u) + self.boundary


def assemble_diffusion(mesh: Mesh, coefficient=1.0, bc: BoundaryCondition | None = None) -> DiffusionOperator:
    """Assemble ``(A u)_K = 1/|K| sum_L |sigma| kappa_KL (u_L - u_K)/d_KL``.

    ``coefficient`` is a scalar or one value per cell. Interior edges use the
    harmonic mean of the two cell values; Dirichlet edges use the cell value
    with a ghost node at half-cell distance.
    """
    bc = bc or BoundaryCondition()
    n = mesh.n_cells
    kappa = np.broadcast_to(np.asarray(_values(coefficient), dtype=float), (n,))
    if np.any(kappa < 0) or not np.all(np.isfinite(kappa)):
        raise ValueError("diffusion coefficient must be finite and nonnegative")

    k, l, measure, dist = mesh.interior_edges
    trans = measure * harmonic_mean(kappa[k], kappa[l]) / dist / mesh.cell_measure
    diag = np.zeros(n)
    np.add.at(diag, k, -trans)
    np.add.at(diag, l, -trans)
    boundary = np.zeros(n)
    for side in SIDES:
        cond = bc.side(side)
        if isinstance(cond, Dirichlet):
            cells, sigma, half = mesh.boundary_cells(side)
            t = sigma * kappa[cells] / half / mesh.cell_measure
            diag[cells] -= t
            boundary[cells] += t * cond.value
    rows = np.concatenate([k, l, np.arange(n)])
    cols = np.concatenate([l, k, np.arange(n)])
    vals = np.concatenate([trans, trans, diag])
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return DiffusionOperator(matrix, boundary)


def l2_norm(mesh: Mesh, u) -> float:
    vals = _values(u)
    return float(np.sqrt(mesh.cell_measure * np.dot(vals, vals)))


def integrate(mesh: Mesh, u) -> float:
    """Midpoint quadrature of a cell field over the domain."""
    return float(mesh.cell_measure * np.sum(_values(u)))
