"""Conductivity families with a prescribed Dini modulus."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..field import Field, GridSpec, smooth_step
from ..modulus import DomainError, ModulusSpec, eval_modulus
from ..spaces import SeminormReport, c_modulus_seminorm


def modulus_profile(rho, spec: ModulusSpec, r_in: float = 0.2, r_out: float = 0.8):
    """``min(m(rho), m(r_in))`` tapered smoothly from 1 at r_in to 0 at r_out."""
    rho = np.asarray(rho, dtype=float)
    clamp = np.minimum(eval_modulus(spec, rho), eval_modulus(spec, r_in))
    return clamp * (1.0 - smooth_step((rho - r_in) / (r_out - r_in)))


def dini_profile(rho, alpha: float = 2.0, r_in: float = 0.2, r_out: float = 0.8):
    return modulus_profile(rho, ModulusSpec("log-power", alpha), r_in, r_out)


def radial_seminorm(alpha: float, r_in: float, r_out: float, points: int = 4001,
                    profile_spec: ModulusSpec | None = None) -> float:
    """C^varpi seminorm of the radial profile by a dense 1-D scan.

    For a radial function the extremal pairs lie on one ray, so this is
    the seminorm of the planar bump as well.
    """
    spec = ModulusSpec("log-power", alpha)
    rho = np.linspace(0.0, r_out, points)
    g = modulus_profile(rho, profile_spec or spec, r_in, r_out)
    best = 0.0
    for d in range(1, points):
        best = max(best, float(np.abs(g[d:] - g[:-d]).max()) / eval_modulus(spec, rho[d]))
    return best


@dataclass(frozen=True, eq=False)
class Conductivity:
    gamma: Field
    epsilon_bound: float
    boundary_radius: float
    alpha: float = 2.0
    seminorm: SeminormReport | None = None
    profile: object = None
    center: complex = 0j

    def __post_init__(self):
        g = self.gamma.samples
        if np.any(np.abs(g.imag) > 0):
            raise DomainError("conductivity must be real")
        e = self.epsilon_bound
        if not 0 < e < 1:
            raise DomainError("epsilon bound must lie in (0, 1)")
        if np.any(g.real < e) or np.any(g.real > 1.0 / e):
            raise DomainError("conductivity violates its epsilon bounds")
        if not 0 < self.boundary_radius < 1:
            raise DomainError("boundary radius must lie in (0, 1)")
        outside = np.abs(self.gamma.grid.z) >= self.boundary_radius
        if np.any(g[outside] != 1.0):
            raise DomainError("conductivity must equal 1 for |z| >= boundary radius")

    def evaluate(self, z):
        """Exact values off the grid when the analytic profile is known."""
        if self.profile is None:
            raise DomainError("no analytic profile attached")
        return self.profile(np.asarray(z))


def make_dini_conductivity(alpha: float, t: float, z0: complex = 0j, radii=(0.2, 0.8),
                           grid: GridSpec = GridSpec(), epsilon: float = 0.1, seed: int = 0,
                           measure: bool = True) -> Conductivity:
    """``gamma = 1 + t eta(|z - z0|)`` with the tapered Dini profile eta."""
    r_in, r_out = radii
    z0 = complex(z0)
    if not 0 < r_in < r_out:
        raise DomainError("need 0 < r_in < r_out")
    reach = abs(z0) + r_out
    if not reach < 1:
        raise DomainError(f"support |z0| + r_out = {reach} must stay inside the unit disk")
    peak = float(dini_profile(r_in, alpha, r_in, r_out))
    lo, hi = 1.0 + min(0.0, t * peak), 1.0 + max(0.0, t * peak)
    if lo < epsilon or hi > 1.0 / epsilon:
        raise DomainError(f"amplitude t={t} violates the epsilon={epsilon} bounds")

    def profile(z):
        return 1.0 + t * dini_profile(np.abs(z - z0), alpha, r_in, r_out)

    gamma = Field(grid, profile(grid.z).astype(complex))
    report = None
    if measure:
        report = c_modulus_seminorm(gamma, ModulusSpec("log-power", alpha), seed=seed)
    return Conductivity(gamma, epsilon, min(reach + grid.h, 0.999), alpha, report, profile, z0)


def test_family(grid: GridSpec, alpha: float = 2.0):
    """Five Dini conductivities with varied amplitude, sign and centre."""
    specs = [(0.4, 0j), (-0.3, 0j), (0.3, 0.1 + 0.05j), (0.5, -0.1j), (0.2, -0.1 + 0.0j)]
    return [make_dini_conductivity(alpha, t, z0, grid=grid, measure=False) for t, z0 in specs]


def make_dini_mu(alpha: float, kappa: float, z0: complex = 0j, radii=(0.2, 0.8),
                 grid: GridSpec = GridSpec(), sign: float = -1.0, profile_spec: ModulusSpec | None = None):
    """Dini Beltrami coefficient ``sign * kappa * eta / max eta`` with sup exactly kappa.

    ``sign = -1`` corresponds to a conductivity above 1.  ``profile_spec``
    swaps the log-power shape for another modulus (e.g. Holder).  Gamma is the
    analytic C^varpi norm, ``kappa (1 + S / max eta)`` with S the radial seminorm.
    """
    from ..beltrami import BeltramiCoefficient

    r_in, r_out = radii
    if not abs(complex(z0)) + r_out < 1:
        raise DomainError("support must stay inside the unit disk")
    pspec = profile_spec or ModulusSpec("log-power", alpha)
    peak = float(modulus_profile(r_in, pspec, r_in, r_out))
    eta = modulus_profile(np.abs(grid.z - complex(z0)), pspec, r_in, r_out) / peak
    mu = Field(grid, (sign * kappa * eta).astype(complex))
    semi = radial_seminorm(alpha, r_in, r_out, profile_spec=pspec) / peak
    return BeltramiCoefficient(mu, kappa, kappa * (1.0 + semi), alpha)
