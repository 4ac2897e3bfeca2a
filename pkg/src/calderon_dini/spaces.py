"""Norms, seminorms and analytic oracles for the weighted Fourier spaces."""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import integrate, special

from .field import Field, GridSpec, d_x, d_y, smooth_step, to_spectral
from .modulus import (
    DomainError,
    ModulusSpec,
    QuadratureError,
    ThetaWeight,
    eval_modulus,
    eval_theta,
    eval_tilde_omega,
)

FULL_SCAN_MAX_N = 64
DEFAULT_PAIR_SAMPLES = 1_000_000


# --------------------------------------------------------------------------
# L2 modulus and weighted spectral norms

def l2_modulus(f: Field, y: complex) -> float:
    """``||f(. + y) - f||_2`` for a lattice vector y, with periodic shift."""
    jx, jy = f.grid.lattice_shift(complex(y))
    shifted = np.roll(f.samples, shift=(-jy, -jx), axis=(0, 1))
    return float(f.grid.h * np.linalg.norm(shifted - f.samples))


def l2_modulus_spectral(f: Field, y: complex) -> float:
    """Same quantity via Plancherel: ``||(exp(2 pi i xi.y) - 1) f^||``."""
    F = to_spectral(f)
    y = complex(y)
    phase = np.exp(2j * np.pi * (F.grid.zeta.real * y.real + F.grid.zeta.imag * y.imag))
    return float(F.grid.dxi * np.linalg.norm((phase - 1.0) * F.coefficients))


def _weighted_energy(f: Field, weights) -> float:
    F = to_spectral(f)
    return float(F.grid.dxi**2 * np.sum(np.abs(F.coefficients) ** 2 * weights))


def w_theta_norm(f: Field, w: ThetaWeight) -> float:
    """``(int |f^|^2 (1 + theta(|xi|)) dxi)^(1/2)`` on the frequency lattice."""
    xi = np.abs(f.grid.zeta)
    return math.sqrt(_weighted_energy(f, 1.0 + w(xi)))


def spectral_tail(f: Field, w: ThetaWeight, R0: float, nu: float) -> float:
    """``int_{|xi| >= R0} |f^|^2 theta(|xi|)^nu dxi``."""
    if not R0 > 1:
        raise DomainError("R0 must exceed 1")
    if not 0 <= nu <= 1:
        raise DomainError("nu must lie in [0, 1]")
    xi = np.abs(f.grid.zeta)
    sel = xi >= R0
    weights = np.zeros_like(xi)
    weights[sel] = w(xi[sel]) ** nu
    return _weighted_energy(f, weights)


def spectral_tail_bound(f: Field, w: ThetaWeight, R0: float, nu: float) -> float:
    return w_theta_norm(f, w) ** 2 / eval_theta(w, R0) ** (1.0 - nu)


def band_limit(f: Field, xi_max: float) -> Field:
    """Zero every Fourier coefficient with ``|xi| > xi_max``."""
    from .field import apply_multiplier

    return apply_multiplier(f, (np.abs(f.grid.zeta) <= xi_max).astype(float))


# --------------------------------------------------------------------------
# I_0 profile: the radial integral that is comparable to theta

def _inv_tilde_omega_sq(w: ThetaWeight, s):
    return eval_tilde_omega(w.base_modulus, s) ** -2


def _radial_weight(w: ThetaWeight, x, scale):
    """``1 / tilde_omega(x / scale)^2``."""
    return _inv_tilde_omega_sq(w, x / scale)


def _kinks(scale):
    return [c * scale for c in (0.5, 1.0, 2.0)]


def _i0_head(w: ThetaWeight, scale: float, x1: float, rtol: float) -> float:
    """``int_0^{x1} (1 - J0(x)) W(x/scale) dx/x`` in u = log x."""
    def f(u):
        x = math.exp(u)
        one_minus = 1.0 - special.j0(x) if x > 1e-3 else x * x / 4.0 - x**4 / 64.0
        return one_minus * _radial_weight(w, x, scale)

    lo, hi = math.log(x1) - 40.0, math.log(x1)
    cuts = sorted({math.log(c) for c in _kinks(scale) if lo < math.log(c) < hi})
    edges = [lo, *cuts, hi]
    return sum(integrate.quad(f, a, b, epsabs=0.0, epsrel=rtol * 1e-2, limit=500)[0]
               for a, b in zip(edges[:-1], edges[1:]))


def _weight_integral(w: ThetaWeight, s0: float, rtol: float) -> float:
    """``int_{s0}^inf ds / (s tilde_omega(s)^2)``; the s >= 2 piece is exact."""
    m = w.base_modulus
    if m.kind != "log-power":
        raise DomainError("I0 is implemented for log-power moduli")
    b = m.exponent
    if not b > 0.5:
        raise DomainError("square-Dini needs exponent > 1/2")
    f = lambda u: _inv_tilde_omega_sq(w, math.exp(u))
    u0 = math.log(s0)
    l2 = math.log(2.0)
    total = 0.0
    if u0 < l2:
        edges = [u0, *[c for c in (-l2, 0.0) if c > u0], l2]
        for a, c in zip(edges[:-1], edges[1:]):
            total += integrate.quad(f, a, c, epsabs=0.0, epsrel=rtol * 1e-2, limit=200)[0]
        u0 = l2
    # (log s)^(-2b) / s has antiderivative -(log s)^(1-2b)/(2b-1)
    return total + u0 ** (1.0 - 2.0 * b) / (2.0 * b - 1.0)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _j0_zeros(n_first: int, count: int) -> np.ndarray:
    """Zeros j_{0,n} for n = n_first .. n_first+count-1 (McMahon past the tenth)."""
    n = np.arange(n_first, n_first + count, dtype=float)
    b = (n - 0.25) * np.pi
    out = b + 1.0 / (8.0 * b) - 31.0 / (384.0 * b**3) + 3779.0 / (15360.0 * b**5)
    exact = special.jn_zeros(0, 10)
    low = n <= 10
    out[low] = exact[n[low].astype(int) - 1]
    return out


def _gl_pieces(f, edges) -> np.ndarray:
    """Gauss-Legendre integral of a vectorised f over each [edges[i], edges[i+1]]."""
    a, b = edges[:-1, None], edges[1:, None]
    x = 0.5 * (b - a) * _GL_NODES[None, :] + 0.5 * (a + b)
    return 0.5 * (b - a)[:, 0] * (f(x) @ _GL_WEIGHTS)


def _i0_bessel_tail(w: ThetaWeight, scale: float, x1: float, n_tail: int = 64,
                    chunk: int = 200_000) -> float:
    """``int_{x1}^inf J0(x) W(x/scale) dx/x``.

    Integrated exactly between consecutive zeros of J0 up to a point past
    the last kink of W; the remaining alternating series of half-period
    contributions is summed by repeated averaging of its partial sums.
    """
    f = lambda x: special.j0(x) * _radial_weight(w, x, scale) / x
    kinks = np.array([c for c in _kinks(scale) if c > x1])
    last = kinks.max() if kinks.size else x1
    n_direct = int(math.ceil(last / math.pi)) + 40
    total = 0.0
    for first in range(2, n_direct + 1, chunk):
        cnt = min(chunk, n_direct + 1 - first)
        z = _j0_zeros(first, cnt)
        lo = x1 if first == 2 else float(_j0_zeros(first - 1, 1)[0])
        edges = np.unique(np.concatenate([[lo], z, kinks[(kinks > lo) & (kinks < z[-1])]]))
        total += float(_gl_pieces(f, edges).sum())
    z = _j0_zeros(n_direct, n_tail + 1)
    partial = np.cumsum(_gl_pieces(f, z))
    for _ in range(n_tail // 2):
        partial = 0.5 * (partial[1:] + partial[:-1])
    return total + float(partial[-1])


def i0_value(w: ThetaWeight, r: float, rtol: float = 1e-6) -> float:
    """``I_0(r) = int_{R^2} |exp(-2 pi i xi.y) - 1|^2 / (|y|^2 tilde_omega(|y|)^2) dy`` at ``|xi| = r``.

    The angular integral is closed form,
    ``int_{-pi}^{pi} 2 (1 - cos(x cos t)) dt = 4 pi (1 - J0(x))``, leaving
    ``4 pi int_0^inf (1 - J0(x)) W(x / 2 pi r) dx / x`` with ``W = tilde_omega^-2``.
    The radial integral is split at the first zero x1 of J0.
    """
    if not r > 0:
        raise DomainError("r must be positive")
    scale = 2.0 * math.pi * r
    x1 = float(special.jn_zeros(0, 1)[0])
    head = _i0_head(w, scale, x1, rtol)
    tail = _weight_integral(w, x1 / scale, rtol) - _i0_bessel_tail(w, scale, x1)
    value = 4.0 * math.pi * (head + tail)
    if not np.isfinite(value):
        raise QuadratureError(f"I0({r}) did not converge", value, np.inf)
    return value


def i_xi_truncated(w: ThetaWeight, xi: complex, s_max: float, angular: str = "trapezoid",
                   rtol: float = 1e-9) -> float:
    """``I(xi)`` restricted to ``|y| < s_max`` as a genuine 2-D integral.

    ``angular="trapezoid"`` integrates the direction of y numerically (the
    integrand is periodic and entire in the angle, so the trapezoid rule is
    spectrally accurate); ``angular="bessel"`` uses the closed-form angular
    integral.  Agreement of the two checks the Bessel reduction.
    """
    xi = complex(xi)
    rho = abs(xi)

    def f(u):
        s = math.exp(u)
        if angular == "bessel":
            ang = 4.0 * math.pi * (1.0 - special.j0(2.0 * math.pi * rho * s))
        else:
            m = 64 + 2 * int(math.ceil(2.0 * math.pi * rho * s))
            t = 2.0 * math.pi * np.arange(m) / m
            phase = 2.0 * math.pi * s * (xi.real * np.cos(t) + xi.imag * np.sin(t))
            ang = 2.0 * math.pi * np.mean(2.0 * (1.0 - np.cos(phase)))
        return ang * _inv_tilde_omega_sq(w, s)

    hi = math.log(s_max)
    lo = math.log(1e-3 / max(rho, 1e-300)) - 20.0
    cuts = sorted({c for c in (math.log(0.5), 0.0, math.log(2.0)) if lo < c < hi})
    edges = [lo, *cuts, hi]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        total += integrate.quad(f, a, b, epsabs=0.0, epsrel=rtol, limit=1000)[0]
    return total


def i0_profile(w: ThetaWeight, r_list, rtol: float = 1e-6):
    """List of ``(r, I0(r), theta(r))``; failures report NaN for that r."""
    out = []
    for r in r_list:
        try:
            i0 = i0_value(w, float(r), rtol)
        except (QuadratureError, ArithmeticError):
            i0 = float("nan")
        out.append((float(r), i0, eval_theta(w, float(r))))
    return out


def equivalence_band(profile) -> float:
    """Largest c with ``c <= theta/I0 <= 1/c`` over a profile."""
    ratios = np.array([th / i0 for _, i0, th in profile if th > 0 and np.isfinite(i0)])
    return float(min(ratios.min(), 1.0 / ratios.max()))


# --------------------------------------------------------------------------
# sup seminorms

@dataclass(frozen=True)
class SeminormReport:
    value: float
    method: str
    sample_seed: int
    pair_count: int


def _full_scan(samples, mask, spec: ModulusSpec, h: float):
    n = samples.shape[0]
    vals = np.where(mask, samples, np.nan)
    best = 0.0
    count = 0
    for dy in range(0, n):
        for dx in range(-(n - 1), n):
            if dy == 0 and dx <= 0:
                continue
            a = vals[dy:, max(dx, 0): n + min(dx, 0)]
            b = vals[: n - dy, max(-dx, 0): n - max(dx, 0)]
            diff = np.abs(a - b)
            if np.all(np.isnan(diff)):
                continue
            count += int(np.count_nonzero(~np.isnan(diff)))
            best = max(best, float(np.nanmax(diff)) / eval_modulus(spec, h * math.hypot(dx, dy)))
    return best, count


def _shift_max(vals, dx, dy):
    n = vals.shape[0]
    ys, ye = max(dy, 0), n + min(dy, 0)
    xs, xe = max(dx, 0), n + min(dx, 0)
    a = vals[ys:ye, xs:xe]
    b = vals[ys - dy: ye - dy, xs - dx: xe - dx]
    diff = np.abs(a - b)
    if diff.size == 0 or np.all(np.isnan(diff)):
        return 0.0, 0
    return float(np.nanmax(diff)), int(np.count_nonzero(~np.isnan(diff)))


def _sampled_scan(samples, mask, spec: ModulusSpec, h: float, seed: int, n_pairs: int):
    n = samples.shape[0]
    vals = np.where(mask, samples, np.nan)
    best = 0.0
    count = 0
    for dx, dy in ((1, 0), (0, 1), (1, 1), (1, -1)):
        m, c = _shift_max(vals, dx, dy)
        count += c
        best = max(best, m / eval_modulus(spec, h * math.hypot(dx, dy)))
    rng = np.random.default_rng(seed)
    iy, ix = np.nonzero(mask)
    if iy.size < 2:
        return best, count
    n_shells = max(1, int(math.ceil(math.log2(n * math.sqrt(2.0)))))
    per_shell = max(1, n_pairs // n_shells)
    for j in range(n_shells):
        base = rng.integers(0, iy.size, per_shell)
        length = 2.0 ** (j + rng.random(per_shell))
        ang = 2.0 * math.pi * rng.random(per_shell)
        ddx = np.rint(length * np.cos(ang)).astype(int)
        ddy = np.rint(length * np.sin(ang)).astype(int)
        y0, x0 = iy[base], ix[base]
        y1, x1 = y0 + ddy, x0 + ddx
        ok = (y1 >= 0) & (y1 < n) & (x1 >= 0) & (x1 < n) & ((ddx != 0) | (ddy != 0))
        y0, x0, y1, x1, ddx, ddy = y0[ok], x0[ok], y1[ok], x1[ok], ddx[ok], ddy[ok]
        ok = mask[y1, x1]
        y0, x0, y1, x1, ddx, ddy = y0[ok], x0[ok], y1[ok], x1[ok], ddx[ok], ddy[ok]
        if y0.size == 0:
            continue
        diff = np.abs(samples[y0, x0] - samples[y1, x1])
        ratio = diff / eval_modulus(spec, h * np.hypot(ddx, ddy))
        count += int(y0.size)
        best = max(best, float(ratio.max()))
    return best, count


def c_modulus_seminorm(f: Field, spec: ModulusSpec, mode: str = "auto", seed: int = 0,
                       mask=None, n_pairs: int = DEFAULT_PAIR_SAMPLES) -> SeminormReport:
    """``sup |f(x) - f(y)| / omega(|x - y|)`` over grid pairs (Euclidean distance).

    ``mode="full-pair-scan"`` visits every pair (N <= 64 only);
    ``mode="sampled-pairs"`` takes all nearest-neighbour pairs plus a seeded
    sample stratified over dyadic distance shells, so it never overshoots
    the full value.  ``mask`` restricts both points of each pair.
    """
    g = f.grid
    if mode == "auto":
        mode = "full-pair-scan" if g.N <= FULL_SCAN_MAX_N else "sampled-pairs"
    m = np.ones((g.N, g.N), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mode == "full-pair-scan":
        if g.N > FULL_SCAN_MAX_N:
            raise DomainError(f"full pair scan refused for N={g.N} > {FULL_SCAN_MAX_N}")
        value, count = _full_scan(f.samples, m, spec, g.h)
    elif mode == "sampled-pairs":
        value, count = _sampled_scan(f.samples, m, spec, g.h, seed, n_pairs)
    else:
        raise DomainError(f"unknown seminorm mode {mode!r}")
    return SeminormReport(value=value, method=mode, sample_seed=seed, pair_count=count)


def c_modulus_norm(f: Field, spec: ModulusSpec, mode: str = "auto", seed: int = 0, mask=None) -> float:
    """Sup plus seminorm, the full C^omega norm."""
    m = np.ones(f.samples.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    sup = float(np.max(np.abs(f.samples[m]))) if m.any() else 0.0
    return sup + c_modulus_seminorm(f, spec, mode, seed, mask).value


# --------------------------------------------------------------------------
# interpolation inequality

def zeta_inverse(sigma: ModulusSpec, target: float) -> float:
    """Inverse of ``r -> r sigma(r)`` by bisection down to float resolution."""
    if target < 0:
        raise DomainError("target must be nonnegative")
    if target == 0:
        return 0.0
    zeta = lambda r: r * eval_modulus(sigma, r)
    lo, hi = 0.0, 1.0
    while zeta(hi) < target:
        lo, hi = hi, 2.0 * hi
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if zeta(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * 1e-4 * max(hi, 1e-300):
            break
    return 0.5 * (lo + hi)


def interpolation_rhs(sup_f: float, seminorm: float, sigma: ModulusSpec) -> float:
    """``2 sigma(zeta^-1(sup_f / seminorm)) seminorm`` (0 when the seminorm vanishes)."""
    if seminorm == 0:
        return 0.0
    r = zeta_inverse(sigma, sup_f / seminorm)
    return 2.0 * eval_modulus(sigma, r) * seminorm


def interpolation_bound(f: Field, sigma: ModulusSpec, axis: int = 0, mode: str = "auto",
                        seed: int = 0) -> tuple[float, float]:
    """``(sup |f_{x_i}|, 2 sigma(zeta^-1(|f|_0 / [f_{x_i}]_sigma)) [f_{x_i}]_sigma)``.

    The derivative is spectral; ``axis=0`` differentiates in x, ``1`` in y.
    """
    df = d_x(f) if axis == 0 else d_y(f)
    lhs = df.sup()
    semi = c_modulus_seminorm(df, sigma, mode, seed).value
    if semi == 0:
        return (0.0, 0.0) if lhs < 1e-12 else (lhs, 0.0)
    return lhs, interpolation_rhs(f.sup(), semi, sigma)


def holder_interpolation_exponent(a: float, sup_f: float = 1e-3, seminorm: float = 1.0,
                                  factor: float = math.e) -> float:
    """Exponent of ``sup_f`` in the Holder specialization, measured numerically.

    With ``sigma = r^a`` the bound is ``2 sup_f^t seminorm^(1-t)``, t = a/(1+a);
    this returns the log-log slope of the computed right-hand side in sup_f.
    """
    sigma = ModulusSpec("holder", a)
    r1 = interpolation_rhs(sup_f, seminorm, sigma)
    r2 = interpolation_rhs(sup_f * factor, seminorm, sigma)
    return math.log(r2 / r1) / math.log(factor)


# --------------------------------------------------------------------------
# oscillatory integrals

def oscillatory_integral(s: float) -> float:
    """``F(s) = int_0^pi cos(2 pi s cos t) dt`` by adaptive quadrature."""
    if s < 1:
        raise DomainError("s must be >= 1")
    val, _ = integrate.quad(lambda t: math.cos(2.0 * math.pi * s * math.cos(t)), 0.0, math.pi,
                            epsabs=1e-12, epsrel=1e-12, limit=2000)
    return val


def cosine_gap_integral(s: float) -> float:
    """``int_{-pi}^{pi} (1 - cos(2 pi s cos t)) dt = 2 pi - 2 F(s)``."""
    return 2.0 * math.pi - 2.0 * oscillatory_integral(s)


def bessel_j0_series(x: float) -> float:
    """``J0(x)`` from its power series in extended precision (independent oracle)."""
    x = abs(float(x))
    dps = 30 + int(x / 2.0)
    with mpmath.workdps(dps):
        q = -(mpmath.mpf(x) / 2) ** 2
        term = mpmath.mpf(1)
        total = mpmath.mpf(1)
        m = 0
        eps = mpmath.mpf(10) ** (-25)
        while True:
            m += 1
            term *= q / (m * m)
            total += term
            if abs(term) < eps and m > x:
                break
        return float(total)


# --------------------------------------------------------------------------
# cut-off Cauchy kernel and its Fourier decay

def chi(r):
    """Smooth cut-off: 1 on [0, 1], 0 on [3/2, inf)."""
    r = np.asarray(r, dtype=float)
    return 1.0 - smooth_step((r - 1.0) / 0.5)


def cutoff_kernel(z: complex, grid: GridSpec) -> Field:
    """Samples of ``chi(|y|) / (pi (z - y))``; the singular cell is set to its
    principal-value average, which is 0 by symmetry of the square cell."""
    y = grid.z
    diff = z - y
    sing = np.abs(diff) < 0.5 * grid.h
    safe = np.where(sing, 1.0, diff)
    vals = chi(np.abs(y)) / (np.pi * safe)
    vals[sing] = 0.0
    return Field(grid, vals)


def kernel_l1_norm(z: complex) -> float:
    """``||K_z||_1`` in polar coordinates centred at z (the 1/rho cancels)."""
    z = complex(z)
    def inner(t):
        e = complex(math.cos(t), math.sin(t))
        rho_max = abs(z) + 1.5
        f = lambda rho: float(chi(abs(z + rho * e)))
        return integrate.quad(f, 0.0, rho_max, epsabs=1e-11, epsrel=1e-10, limit=200,
                              points=[max(0.0, abs(z) - 1.5), max(0.0, abs(z) - 1.0), abs(z) + 1.0])[0]
    val, _ = integrate.quad(inner, 0.0, 2.0 * math.pi, epsabs=1e-10, epsrel=1e-9, limit=200)
    return val / math.pi


@dataclass(frozen=True)
class KernelDecayReport:
    z: complex
    sup_ratio: float
    xi: np.ndarray
    khat_abs: np.ndarray
    khat0: float

    def profile(self, n_bins: int = 40):
        """Radially binned max of ``|K^|`` for plotting/serialisation."""
        edges = np.linspace(0.0, self.xi.max(), n_bins + 1)
        idx = np.clip(np.digitize(self.xi, edges) - 1, 0, n_bins - 1)
        out = []
        for b in range(n_bins):
            sel = idx == b
            if sel.any():
                out.append((float(0.5 * (edges[b] + edges[b + 1])), float(self.khat_abs[sel].max())))
        return out


def kernel_fourier_decay(z: complex, xi_max: float, grid: GridSpec) -> KernelDecayReport:
    """``sup_{2 <= |xi| <= xi_max} |K_z^(xi)| |xi| / log|xi|`` from the lattice transform."""
    z = complex(z)
    if not (-grid.L <= z.real < grid.L and -grid.L <= z.imag < grid.L):
        raise DomainError(f"z={z} lies outside the cell [-{grid.L}, {grid.L})^2")
    K = to_spectral(cutoff_kernel(z, grid))
    xi = np.abs(grid.zeta).ravel()
    kabs = np.abs(K.coefficients).ravel()
    sel = (xi >= 2.0) & (xi <= xi_max)
    ratio = kabs[sel] * xi[sel] / np.log(xi[sel])
    return KernelDecayReport(z=z, sup_ratio=float(ratio.max()), xi=xi, khat_abs=kabs,
                             khat0=float(kabs[np.argmin(xi)]))
