"""Beltrami solvers and complex geometric optics (CGO) solutions.

Everything is written in terms of the density ``q = dbar(phi)`` (or
``dbar(psi)``), supported where mu is.  The phase is ``z + P q`` with the
affine part kept analytic.  The Cauchy and Beurling transforms are the
periodic multipliers corrected for the total mass of ``q``: the mass
``c = int q`` is carried by a Gaussian ``B`` whose plane transforms are
known in closed form,

    P[B] = G = (1 - exp(-|z|^2/s^2)) / (pi z),    T[B] = dG,

and only the mean-zero remainder ``q - cB`` goes through the FFT.  Then
``dbar(P q) = q`` holds exactly on the grid and ``P q ~ c/(pi z)`` far out,
as for the transform on the plane.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .field import Field, GridSpec, beurling_symbol, cauchy_symbol, window, d as d_op, d_bar
from .modulus import DomainError, ModulusSpec, ThetaWeight, eval_theta, fit_theta_exponent
from .spaces import c_modulus_norm, c_modulus_seminorm


class ConvergenceError(RuntimeError):
    """An iteration hit its cap; ``achieved`` is the last ratio or update reached."""

    def __init__(self, message, achieved, iterations):
        super().__init__(message)
        self.achieved = achieved
        self.iterations = iterations


# --------------------------------------------------------------------------
# coefficient and configuration types

@dataclass(frozen=True, eq=False)
class BeltramiCoefficient:
    mu: Field
    kappa: float
    gamma_norm: float = float("nan")
    alpha: float = 2.0

    def __post_init__(self):
        if not 0.0 <= self.kappa < 1.0:
            raise DomainError(f"kappa={self.kappa} must lie in [0, 1)")
        if self.mu.sup() > self.kappa * (1 + 1e-12) + 1e-300:
            raise DomainError("sup |mu| exceeds kappa")
        outside = np.abs(self.mu.grid.z) >= 1.0
        if np.any(self.mu.samples[outside] != 0):
            raise DomainError("mu must vanish for |z| >= 1")

    @property
    def grid(self) -> GridSpec:
        return self.mu.grid

    @classmethod
    def zero(cls, grid: GridSpec):
        return cls(grid.zeros(), 0.0, 0.0)


def mu_from_gamma(gamma: Field, alpha: float = 2.0, gamma_norm: float | None = None,
                  seed: int = 0) -> BeltramiCoefficient:
    """``mu = (1 - gamma)/(1 + gamma)``; kappa is the sampled sup of |mu|.

    When ``gamma_norm`` is not given it is measured as the sampled
    C^varpi norm (sup plus seminorm) of mu with ``varpi = |log r|^-alpha``.
    """
    g = gamma.samples
    if np.any(np.abs(g.imag) > 0):
        raise DomainError("conductivity must be real")
    if np.any(g.real <= 0):
        raise DomainError("conductivity must be positive")
    mu = Field(gamma.grid, ((1.0 - g.real) / (1.0 + g.real)).astype(complex))
    kappa = mu.sup()
    if gamma_norm is None:
        gamma_norm = 0.0 if kappa == 0 else c_modulus_norm(mu, ModulusSpec("log-power", alpha), seed=seed)
    return BeltramiCoefficient(mu, kappa, gamma_norm, alpha)


def gamma_from_mu(mu) -> Field:
    m = mu.mu if isinstance(mu, BeltramiCoefficient) else mu
    return Field(m.grid, (1.0 - m.samples) / (1.0 + m.samples))


@dataclass(frozen=True)
class SolverConfig:
    n_max: int = 200
    tol: float = 1e-10
    kappa1: float | None = None
    outer_max: int = 100
    outer_tol: float = 1e-8
    damping: float = 1.0
    mass_width: float = 0.3
    anderson_depth: int = 6
    method: str = "auto"
    switch_after: int = 12

    def __post_init__(self):
        if not (self.tol > 0 and self.outer_tol > 0):
            raise DomainError("tolerances must be positive")
        if self.kappa1 is not None and not 0 <= self.kappa1 < 1:
            raise DomainError("kappa1 must lie in [0, 1)")
        if not 0 < self.damping <= 1:
            raise DomainError("damping must lie in (0, 1]")
        if self.method not in ("auto", "fixed-point", "newton-krylov"):
            raise DomainError(f"unknown method {self.method!r}")

    def contraction(self, mu: BeltramiCoefficient) -> float:
        # at p = 2 the Beurling transform has norm one
        return mu.kappa if self.kappa1 is None else self.kappa1


# --------------------------------------------------------------------------
# plane-consistent transforms

def _mass_profile(grid: GridSpec, s: float):
    """``(B, G, dG)`` for the unit-mass Gaussian of width s."""
    z = grid.z
    x = np.abs(z) ** 2 / s**2
    B = np.exp(-x) / (np.pi * s**2)
    small = x < 1e-4
    xs = np.where(small, 1.0, x)
    # (1 - e^-x)/x and (1 - (1+x) e^-x)/x^2, with series near 0
    r1 = np.where(small, 1.0 - x / 2.0 + x**2 / 6.0, -np.expm1(-xs) / xs)
    r2 = np.where(small, 0.5 - x / 3.0 + x**2 / 8.0,
                  (-np.expm1(-xs) - xs * np.exp(-xs)) / xs**2)
    G = r1 * z.conj() / (np.pi * s**2)
    dG = -r2 * z.conj() ** 2 / (np.pi * s**4)
    return B, G, dG


class PlaneTransforms:
    """Cauchy and Beurling transforms of compactly supported densities.

    The FFT inverse of dbar is the zero-mean periodic one.  Mass is moved
    onto a Gaussian with known plane transforms; what remains has zero
    mass, and its periodic Cauchy transform differs from the plane one by
    the cell mean of the latter, ``-(1/A) int r conj(w) dw`` up to terms of
    order ``(R/L)^4`` from the square corners and the periodic images.
    """

    def __init__(self, grid: GridSpec, width: float = 0.3):
        self.grid = grid
        self.B, self.G, self.dG = _mass_profile(grid, width)
        self._t = beurling_symbol(grid)
        self._p = cauchy_symbol(grid)
        self._zbar = grid.z.conj()
        self._area = (2.0 * grid.L) ** 2

    def mass(self, q: np.ndarray) -> complex:
        return complex(self.grid.h**2 * q.sum())

    def _offset(self, q: np.ndarray) -> complex:
        # the Gaussian is radial, so it carries no conj-moment
        return -complex(self.grid.h**2 * np.sum(q * self._zbar)) / self._area

    def both(self, q: np.ndarray):
        """``(P q, T q)`` as sample arrays."""
        c = self.mass(q)
        Q = sfft.fft2(q - c * self.B, workers=-1)
        P = sfft.ifft2(Q * self._p, workers=-1) + c * self.G + self._offset(q)
        T = sfft.ifft2(Q * self._t, workers=-1) + c * self.dG
        return P, T

    def beurling(self, q: np.ndarray) -> np.ndarray:
        c = self.mass(q)
        return sfft.ifft2(sfft.fft2(q - c * self.B, workers=-1) * self._t, workers=-1) + c * self.dG

    def cauchy(self, q: np.ndarray) -> np.ndarray:
        c = self.mass(q)
        return (sfft.ifft2(sfft.fft2(q - c * self.B, workers=-1) * self._p, workers=-1)
                + c * self.G + self._offset(q))


def plane_cauchy(q: Field, width: float = 0.3) -> Field:
    return Field(q.grid, PlaneTransforms(q.grid, width).cauchy(q.samples))


def plane_beurling(q: Field, width: float = 0.3) -> Field:
    return Field(q.grid, PlaneTransforms(q.grid, width).beurling(q.samples))


def _l2(grid: GridSpec, a: np.ndarray) -> float:
    return float(grid.h * np.linalg.norm(a))


# --------------------------------------------------------------------------
# C-linear problem: Neumann series

@dataclass(frozen=True, eq=False)
class CgoLinearSolution:
    psi: Field
    k: complex
    series_terms: list
    residual: float
    sup_deviation: float
    density: Field = None
    d_psi: Field = None

    @property
    def term_norms(self) -> np.ndarray:
        return np.array([t.norm() for t in self.series_terms])

    @property
    def term_ratios(self) -> np.ndarray:
        n = self.term_norms
        n = n[n > 0]
        return n[1:] / n[:-1]


def _check_k(k) -> complex:
    k = complex(k)
    if k == 0:
        raise DomainError("k must be nonzero")
    return k


def solve_linear_cgo(mu: BeltramiCoefficient, k: complex, cfg: SolverConfig = SolverConfig()) -> CgoLinearSolution:
    """``dbar psi = -(conj k / k) mu e_{-k} d psi``, ``psi - z -> 0``.

    Sums ``sum_n (a T)^n a`` with ``a = -(conj k/k) mu e_{-k}`` until a term
    drops below ``tol`` times the first, then ``psi = z + P[sum]``.
    The residual is ``||q - a (1 + T q)|| / ||a||`` for the density q.
    """
    k = _check_k(k)
    g = mu.grid
    z = g.z
    ops = PlaneTransforms(g, cfg.mass_width)
    a = -(k.conjugate() / k) * mu.mu.samples * np.exp(-2j * np.real(k * z))
    a_norm = _l2(g, a)
    if a_norm == 0:
        zero = g.zeros()
        return CgoLinearSolution(Field(g, z.copy()), k, [], 0.0, 0.0, zero, Field(g, np.ones_like(z)))
    terms = [a]
    total = a.copy()
    while _l2(g, terms[-1]) >= cfg.tol * a_norm:
        if len(terms) >= cfg.n_max:
            ratio = _l2(g, terms[-1]) / a_norm
            raise ConvergenceError(f"Neumann series not converged after {cfg.n_max} terms (ratio {ratio:.3e})",
                                   ratio, len(terms))
        nxt = a * ops.beurling(terms[-1])
        terms.append(nxt)
        total += nxt
    P, T = ops.both(total)
    resid = _l2(g, total - a * (1.0 + T)) / a_norm
    return CgoLinearSolution(
        psi=Field(g, z + P),
        k=k,
        series_terms=[Field(g, t) for t in terms],
        residual=resid,
        sup_deviation=float(np.max(np.abs(P))),
        density=Field(g, total),
        d_psi=Field(g, 1.0 + T),
    )


def decompose_g_h(sol: CgoLinearSolution, n0: int):
    """``g_k`` = first n0 series terms, ``h_k`` = the rest of ``dbar psi``."""
    if n0 < 0:
        raise DomainError("n0 must be nonnegative")
    g = sol.psi.grid
    gk = np.zeros((g.N, g.N), dtype=complex)
    for t in sol.series_terms[:n0]:
        gk += t.samples
    return Field(g, gk), Field(g, sol.density.samples - gk)


def tail_bound(kappa: float, kappa1: float, n0: int) -> float:
    """Closed-form bound ``pi^(1/2) kappa kappa1^n0 / (1 - kappa1)`` on ``||h_k||_2``."""
    return math.sqrt(math.pi) * kappa * kappa1**n0 / (1.0 - kappa1)


def gk_lowfreq_mass(g_k: Field, R0: float) -> float:
    """``int_{|xi| < R0} |g_k^(xi)|^2 dxi`` on the frequency lattice."""
    if not R0 > 1:
        raise DomainError("R0 must exceed 1")
    from .field import to_spectral

    F = to_spectral(g_k)
    sel = F.xi_abs < R0
    return float(F.grid.dxi**2 * np.sum(np.abs(F.coefficients[sel]) ** 2))


def lowfreq_bound(n0: int, c_ab: float, gamma_norm: float) -> float:
    return n0 * (c_ab * gamma_norm) ** n0


# --------------------------------------------------------------------------
# nonlinear problem

@dataclass(frozen=True, eq=False)
class CgoPhase:
    phi: Field
    k: complex
    outer_iters: int
    residual: float
    epsilon: Field
    density: Field = None
    d_phi: Field = None
    update: float = 0.0
    damping: float = 1.0
    mu: BeltramiCoefficient = field(default=None, repr=False)

    def f(self) -> Field:
        return Field(self.phi.grid, np.exp(1j * self.k * self.phi.samples))

    def derivatives(self):
        """``(f, d f, dbar f)`` by the chain rule from the density."""
        f = np.exp(1j * self.k * self.phi.samples)
        g = self.phi.grid
        return (Field(g, f), Field(g, 1j * self.k * f * self.d_phi.samples),
                Field(g, 1j * self.k * f * self.density.samples))


def _nu(mu_s, k, phi):
    return -(k.conjugate() / k) * mu_s * np.exp(-2j * np.real(k * phi))


def _inner(nu, q, ops, grid, tol, n_max):
    """Fixed point of ``q = nu (1 + conj(T q))``; a contraction since |nu| <= kappa."""
    scale = max(_l2(grid, nu), 1e-300)
    for j in range(1, n_max + 1):
        q_new = nu * (1.0 + np.conj(ops.beurling(q)))
        step = _l2(grid, q_new - q)
        q = q_new
        if step <= tol * scale:
            return q, j
    raise ConvergenceError(f"inner iteration not converged after {n_max} steps", step / scale, n_max)


def _anderson_step(hist_x, hist_g, depth):
    """Type-II Anderson mixing from histories of iterates x and residuals g = F(x) - x."""
    m = min(depth, len(hist_g) - 1)
    if m <= 0:
        return hist_x[-1] + hist_g[-1]
    dg = np.stack([hist_g[-i] - hist_g[-i - 1] for i in range(m, 0, -1)], axis=1)
    dx = np.stack([hist_x[-i] - hist_x[-i - 1] for i in range(m, 0, -1)], axis=1)
    gamma, *_ = np.linalg.lstsq(dg, hist_g[-1], rcond=None)
    return hist_x[-1] + hist_g[-1] - (dx + dg) @ gamma


def resolves(grid: GridSpec, k: complex) -> bool:
    """True when the quadratic term ``e_{-2k}`` lies below the Nyquist frequency."""
    return 2.0 * abs(complex(k)) / np.pi <= grid.N / (4.0 * grid.L)


def _newton_krylov(mu_s, k, z, ops, supp, q0, target):
    from scipy.optimize import NoConvergence, newton_krylov

    n = int(supp.sum())
    h = ops.grid.h

    def F(x):
        q = np.zeros_like(z)
        q[supp] = x[:n] + 1j * x[n:]
        P, T = ops.both(q)
        r = (q - _nu(mu_s, k, z + P) * (1.0 + np.conj(T)))[supp]
        return np.concatenate([r.real, r.imag])

    x0 = np.concatenate([q0[supp].real, q0[supp].imag])
    # f_tol is a max norm; this bound makes the L2 residual <= target
    try:
        x = newton_krylov(F, x0, f_tol=target / (h * math.sqrt(2 * n)), method="lgmres", maxiter=50)
    except NoConvergence as exc:
        x = exc.args[0]
    q = np.zeros_like(z)
    q[supp] = x[:n] + 1j * x[n:]
    return q


def solve_nonlinear_cgo(mu: BeltramiCoefficient, k: complex, cfg: SolverConfig = SolverConfig()) -> CgoPhase:
    """``dbar phi = -(conj k / k) mu e_{-k}(phi) conj(d phi)``, ``phi - z -> 0``.

    Outer loop freezes ``nu = -(conj k/k) mu e_{-k}(phi_m)`` and solves the
    R-linear problem by the inner contraction.  It stops once the sup
    update of phi is below ``outer_tol`` and the residual
    ``||q - nu(phi)(1 + conj(T q))|| / ||mu||`` is too.

    The outer map is O(1)-sensitive to phi for large |k|, so its iterates
    (the density on the support of mu) are Anderson-mixed with
    ``cfg.anderson_depth`` previous steps; with depth 0 the plain
    iteration runs, damped to 0.5 once the update grows.  With
    ``method="auto"`` a run still unconverged after ``switch_after`` outer
    steps continues by Newton-Krylov on the same residual, and one more
    frozen outer step certifies the result.
    """
    k = _check_k(k)
    g = mu.grid
    z = g.z
    ops = PlaneTransforms(g, cfg.mass_width)
    mu_s = mu.mu.samples
    mu_norm = _l2(g, mu_s)
    if mu_norm == 0:
        zero = g.zeros()
        return CgoPhase(Field(g, z.copy()), k, 0, 0.0, zero, zero, Field(g, np.ones_like(z)), 0.0, 1.0, mu)
    supp = mu_s != 0
    damping = cfg.damping
    q = np.zeros_like(z)
    corr = np.zeros_like(z)
    hist_x, hist_g = [], []
    last_update = np.inf
    resid = np.inf
    newton_done = cfg.method == "fixed-point"
    fixed_steps = 0
    if cfg.method == "newton-krylov":
        fixed_steps = cfg.switch_after
        newton_done = False
    for m in range(1, cfg.outer_max + 1):
        if not newton_done and fixed_steps >= cfg.switch_after:
            q = _newton_krylov(mu_s, k, z, ops, supp, q, 0.1 * cfg.outer_tol * mu_norm)
            corr = ops.cauchy(q)
            newton_done = True
            hist_x, hist_g = [], []
        fixed_steps += 1
        nu = _nu(mu_s, k, z + corr)
        q_map, _ = _inner(nu, q, ops, g, cfg.tol, cfg.n_max)
        if cfg.anderson_depth > 0:
            hist_x.append(q[supp])
            hist_g.append(q_map[supp] - q[supp])
            if len(hist_x) > cfg.anderson_depth + 1:
                hist_x.pop(0)
                hist_g.pop(0)
            q_new = np.zeros_like(q)
            q_new[supp] = _anderson_step(hist_x, hist_g, cfg.anderson_depth)
        else:
            q_new = q + damping * (q_map - q)
        corr_new = ops.cauchy(q_new)
        update = float(np.max(np.abs(corr_new - corr)))
        q, corr = q_new, corr_new
        if cfg.anderson_depth == 0 and update > last_update and damping == 1.0:
            damping = 0.5
        last_update = update
        T = ops.beurling(q)
        resid = _l2(g, q - _nu(mu_s, k, z + corr) * (1.0 + np.conj(T))) / mu_norm
        if update < cfg.outer_tol and resid <= cfg.outer_tol:
            break
    else:
        raise ConvergenceError(
            f"outer iteration not converged after {cfg.outer_max} steps (update {last_update:.3e}, residual {resid:.3e})",
            last_update, cfg.outer_max)
    return CgoPhase(
        phi=Field(g, z + corr), k=k, outer_iters=m, residual=resid, epsilon=Field(g, corr),
        density=Field(g, q), d_phi=Field(g, 1.0 + T), update=last_update, damping=damping, mu=mu,
    )


def beltrami_residual(f: Field, df: Field, dbf: Field, mu: Field, mask=None) -> float:
    """``||dbar f - mu conj(d f)|| / ||mu conj(d f)||`` over an optional mask."""
    lhs = dbf.samples - mu.samples * np.conj(df.samples)
    ref = mu.samples * np.conj(df.samples)
    if mask is not None:
        lhs, ref = lhs[mask], ref[mask]
    den = np.linalg.norm(ref)
    return float(np.linalg.norm(lhs) / den) if den > 0 else float(np.linalg.norm(lhs))


# --------------------------------------------------------------------------
# decay, regularity, recovery

@dataclass(frozen=True)
class DecayProfile:
    rows: list
    which: str
    a: float = float("nan")
    log_c: float = float("nan")
    theta_rms: float = float("nan")
    power_exponent: float = float("nan")
    power_rms: float = float("nan")
    errors: dict = field(default_factory=dict)

    @property
    def preferred_model(self) -> str:
        if not (np.isfinite(self.theta_rms) and np.isfinite(self.power_rms)):
            return "none"
        return "power-law" if self.power_rms < self.theta_rms else "double-log"


def cgo_decay_profile(mu: BeltramiCoefficient, k_list, which: str = "linear",
                      cfg: SolverConfig = SolverConfig(), weight: ThetaWeight | None = None,
                      solutions: dict | None = None) -> DecayProfile:
    """Per-k ``sup |solution - z|`` and two fits of the decay.

    ``a``/``theta_rms``: ``log dev = log c - a log theta(|k|)``;
    ``power_exponent``/``power_rms``: ``log dev = log c - p log|k|``.
    Pass a dict as ``solutions`` to collect the solver outputs.
    """
    if which not in ("linear", "nonlinear"):
        raise DomainError("which must be 'linear' or 'nonlinear'")
    weight = weight or ThetaWeight(ModulusSpec("log-power", 1.2))
    rows, errors = [], {}
    for k in k_list:
        try:
            if which == "linear":
                sol = solve_linear_cgo(mu, k, cfg)
                dev = sol.sup_deviation
            else:
                sol = solve_nonlinear_cgo(mu, k, cfg)
                dev = float(np.max(np.abs(sol.epsilon.samples)))
            if solutions is not None:
                solutions[complex(k)] = sol
            rows.append((abs(complex(k)), dev))
        except (ConvergenceError, DomainError) as exc:
            errors[complex(k)] = str(exc)
            rows.append((abs(complex(k)), float("nan")))
    kk = np.array([r[0] for r in rows])
    dd = np.array([r[1] for r in rows])
    ok = np.isfinite(dd) & (dd > 0) & (kk > 1)
    if ok.sum() < 2:
        return DecayProfile(rows, which, errors=errors)
    a, log_c, th_rms = fit_theta_exponent(weight, kk[ok], dd[ok])
    X, Y = np.log(kk[ok]), np.log(dd[ok])
    slope, icpt = np.polyfit(X, Y, 1)
    p_rms = float(np.sqrt(np.mean((Y - slope * X - icpt) ** 2)))
    return DecayProfile(rows, which, a, log_c, th_rms, float(-slope), p_rms, errors)


def jacobian(df: Field, dbf: Field) -> np.ndarray:
    return np.abs(df.samples) ** 2 - np.abs(dbf.samples) ** 2


def cgo_regularity_check(phase: CgoPhase, sigma: ModulusSpec, seed: int = 0, radius: float = 1.0):
    """``(C^{1,sigma} norm of f = e^{ik phi}, inf of the Jacobian)`` on the disk of given radius.

    The norm is sup|f| + sup|d f| + sup|dbar f| plus the sampled sigma
    seminorms of both derivatives, all restricted to the disk.
    """
    f, df, dbf = phase.derivatives()
    mask = np.abs(f.grid.z) <= radius
    sup = lambda a: float(np.max(np.abs(a.samples[mask])))
    semi = lambda a: c_modulus_seminorm(a, sigma, seed=seed, mask=mask).value
    norm = sup(f) + sup(df) + sup(dbf) + semi(df) + semi(dbf)
    jac_min = float(np.min(jacobian(df, dbf)[mask]))
    return norm, jac_min


def spectral_derivatives(f: Field, inner: float | None = None, outer: float | None = None):
    """``(d f, dbar f, valid)`` of ``f`` windowed to ``|z| <= outer``; valid where the window is 1."""
    L = f.grid.L
    inner = 0.6 * L if inner is None else inner
    outer = 0.9 * L if outer is None else outer
    fw = f * window(f.grid, inner, outer)
    valid = np.abs(f.grid.z) <= inner
    return d_op(fw), d_bar(fw), valid


def recover_mu(f, floor: float, derivatives=None):
    """``mu = dbar f / conj(d f)`` where ``|d f| >= floor``, zero elsewhere.

    ``f`` is a Field (derivatives taken spectrally after windowing) or a
    CgoPhase (exact chain-rule derivatives).  Explicit ``(d f, dbar f)``
    may be passed instead.  Returns ``(mu, suppressed_mask)``.
    """
    if not floor > 0:
        raise DomainError("floor must be positive")
    if isinstance(f, CgoPhase):
        _, df, dbf = f.derivatives()
        valid = np.ones(df.samples.shape, dtype=bool)
        grid = df.grid
    elif derivatives is not None:
        df, dbf = derivatives
        valid = np.ones(df.samples.shape, dtype=bool)
        grid = f.grid
    else:
        df, dbf, valid = spectral_derivatives(f)
        grid = f.grid
    den = np.conj(df.samples)
    keep = valid & (np.abs(den) >= floor)
    out = np.zeros((grid.N, grid.N), dtype=complex)
    out[keep] = dbf.samples[keep] / den[keep]
    return Field(grid, out), ~keep
