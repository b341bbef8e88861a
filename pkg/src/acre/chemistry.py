"""Pointwise closures: double-well potential, reaction rates and the phase-field nonlinearity."""

from __future__ import annotations

from dataclasses import dataclass, fields
from itertools import product

import numpy as np


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the phase-field / solute / heat model.

    Attributes
    ----------
    lam : diffuse-interface width.
    gamma : interface diffusion parameter.
    k0 : reaction rate constant.
    e_over_r : activation energy divided by the gas constant.
    c_eq : equilibrium solute concentration.
    m_m : mineral molar density.
    diffusivity : solute diffusivity D.
    cp_rho_f, cp_rho_m : volumetric heat capacities of fluid and mineral.
    k_f, k_m : heat conductivities of fluid and mineral.
    """

    lam: float = 0.05
    gamma: float = 0.01
    k0: float = 1.0
    e_over_r: float = 1.0
    c_eq: float = 0.5
    m_m: float = 1.0
    diffusivity: float = 1.0
    cp_rho_f: float = 1.0
    cp_rho_m: float = 1.0
    k_f: float = 1.0
    k_m: float = 2.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{f.name} must be strictly positive, got {v!r}")

    def gamma_constraint(self) -> tuple[float, float, bool]:
        """Return ``(4*gamma, lam*k0/m_m, satisfied)`` for the solute bound condition."""
        lhs = 4.0 * self.gamma
        rhs = self.lam * self.k0 / self.m_m
        return lhs, rhs, lhs <= rhs


def double_well(phi):
    return 8.0 * phi**2 * (1.0 - phi) ** 2


def double_well_prime(phi):
    return 16.0 * phi * (1.0 - phi) * (1.0 - 2.0 * phi)


def double_well_second(phi):
    return 16.0 * (1.0 - 6.0 * phi + 6.0 * phi**2)


def reaction_rate(T, c, p: ModelParams):
    """Net precipitation rate ``k0 exp(-E/RT) (c^2/c_eq^2 - 1)``.

    Positive values mean precipitation, negative values dissolution.
    """
    T = np.asarray(T, dtype=float)
    if np.any(T <= 0):
        raise ValueError("temperature must be positive in the Arrhenius factor")
    c = np.asarray(c, dtype=float)
    return p.k0 * np.exp(-p.e_over_r / T) * (c**2 / p.c_eq**2 - 1.0)


@dataclass(frozen=True)
class RateBounds:
    """Admissible (T, c) box used to bound the reaction rate."""

    t_min: float
    t_max: float
    c_min: float
    c_max: float

    def __post_init__(self):
        if not (0 < self.t_min <= self.t_max):
            raise ValueError("need 0 < t_min <= t_max")
        if not (0 <= self.c_min <= self.c_max):
            raise ValueError("need 0 <= c_min <= c_max")


@dataclass(frozen=True)
class ConstantRate:
    value: float

    def __call__(self, T, c):
        shape = np.broadcast(np.asarray(T), np.asarray(c)).shape
        return np.full(shape, float(self.value))

    def max_abs(self, bounds: RateBounds | None = None) -> float:
        return abs(float(self.value))


@dataclass(frozen=True)
class ArrheniusRate:
    params: ModelParams

    def __call__(self, T, c):
        return reaction_rate(T, c, self.params)

    def max_abs(self, bounds: RateBounds) -> float:
        # |f| is monotone in T and in c >= 0, so the maximum sits on a corner.
        corners = product((bounds.t_min, bounds.t_max), (bounds.c_min, bounds.c_max))
        return max(abs(float(reaction_rate(t, c, self.params))) for t, c in corners)


def constant_rate(value: float) -> ConstantRate:
    return ConstantRate(float(value))


def g_nonlinearity(phi, pprime_avg, f, p: ModelParams):
    """Phase-field nonlinearity with a supplied domain average of P'.

    ``pprime_avg`` is ``(1/|Omega|) sum_J |J| P'(phi_J)`` and ``f`` the net
    reaction rate at the cell(s).
    """
    s = p.gamma / p.lam**2
    return -s * double_well_prime(phi) - (4.0 / p.lam) * phi * (1.0 - phi) * f / p.m_m + s * pprime_avg


def g_derivative(phi, phi1mphi_avg, f, p: ModelParams):
    """Derivative of the nonlinearity in phi; ``phi1mphi_avg`` is the domain average of phi(1-phi)."""
    return (96.0 * p.gamma / p.lam**2) * (phi * (1.0 - phi) - phi1mphi_avg) - (4.0 / p.lam) * (f / p.m_m) * (
        1.0 - 2.0 * phi
    )


def mg_bound(p: ModelParams, f_max: float) -> float:
    """Upper bound ``24 gamma/lam^2 + 4/lam * f_max/m_m`` of |dG/dphi| on [0, 1]."""
    return 24.0 * p.gamma / p.lam**2 + (4.0 / p.lam) * abs(f_max) / p.m_m
