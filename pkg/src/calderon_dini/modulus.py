"""Moduli of continuity and the Fourier weight built from them.

Three kinds are supported, all held constant beyond ``cap_radius = 1/2``:

* ``log-power``: ``|log r|**(-p)``
* ``integrated-log-power``: ``|log r|**(1 - p) / (p - 1)`` (the integral of
  ``|log s|**(-p) / s`` from 0 to r)
* ``holder``: ``r**p``
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

KINDS = ("log-power", "integrated-log-power", "holder")
CAP_RADIUS = 0.5


class DomainError(ValueError):
    """Parameters outside the admissible range of an operation."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance.

    The partially converged value and error estimate are kept on the
    exception so callers can decide whether to use them.
    """

    def __init__(self, message, value, abserr):
        super().__init__(message)
        self.value = value
        self.abserr = abserr


def _quad(func, a, b, rtol, points=None, limit=200):
    kwargs = dict(epsabs=0.0, epsrel=rtol, limit=limit, full_output=1)
    if points is not None and np.isfinite(a) and np.isfinite(b):
        kwargs["points"] = points
    out = integrate.quad(func, a, b, **kwargs)
    value, abserr = out[0], out[1]
    if len(out) > 3 and abs(value) > 0 and abserr > max(10 * rtol * abs(value), 1e-300):
        raise QuadratureError(f"quadrature on [{a}, {b}] not converged: {out[3]}", value, abserr)
    return value, abserr


@dataclass(frozen=True)
class ModulusSpec:
    kind: str = "log-power"
    exponent: float = 2.0
    cap_radius: float = CAP_RADIUS

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown modulus kind {self.kind!r}")
        if not self.exponent > 0:
            raise DomainError("exponent must be positive")
        if self.kind == "integrated-log-power" and not self.exponent > 1:
            raise DomainError("integrated-log-power needs exponent > 1")
        if self.kind == "holder" and not self.exponent <= 1:
            raise DomainError("holder exponent must lie in (0, 1]")
        if self.kind != "holder" and not (0 < self.cap_radius < 1):
            raise DomainError("log moduli need cap_radius in (0, 1)")

    @property
    def cap_value(self) -> float:
        return float(self._branch(np.array(self.cap_radius)))

    def _branch(self, r):
        p = self.exponent
        if self.kind == "holder":
            return r**p
        u = -np.log(r)
        if self.kind == "log-power":
            return u ** (-p)
        return u ** (1.0 - p) / (p - 1.0)

    def __call__(self, r):
        return eval_modulus(self, r)


def eval_modulus(spec: ModulusSpec, r):
    """Evaluate the modulus with the cap rule; ``value(0) = 0``.

    Works on scalars and arrays alike.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise DomainError("modulus evaluated at negative radius")
    rc = np.clip(r_arr, 0.0, spec.cap_radius)
    out = np.zeros_like(rc)
    pos = rc > 0
    out[pos] = spec._branch(rc[pos])
    if np.ndim(r) == 0:
        return float(out)
    return out


def eval_tilde_omega(spec: ModulusSpec, r):
    """``omega(r)`` for ``r <= 1`` and ``1 / omega(1/r)`` for ``r > 1``."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise DomainError("tilde-omega needs r > 0")
    out = np.empty_like(r_arr)
    low = r_arr <= 1.0
    out[low] = eval_modulus(spec, r_arr[low])
    out[~low] = 1.0 / eval_modulus(spec, 1.0 / r_arr[~low])
    if np.ndim(r) == 0:
        return float(out)
    return out


def dini_integral(spec: ModulusSpec, delta: float, power: int = 1, rtol: float = 1e-10) -> float:
    """``int_delta^{1/2} omega(r)**power / r dr`` (Dini for power 1, square-Dini for 2)."""
    if not 0 < delta < spec.cap_radius:
        raise DomainError("need 0 < delta < cap_radius")
    # substitute u = -log r
    f = lambda u: eval_modulus(spec, math.exp(-u)) ** power
    value, _ = _quad(f, -math.log(spec.cap_radius), -math.log(delta), rtol)
    return value


@dataclass
class ThetaWeight:
    """The weight ``theta(r) = int_1^r ds / (s omega(s/r)**2)`` (zero for r <= 1).

    Scalar evaluation goes through :func:`eval_theta`; calling the weight on
    an array interpolates a lazily built, monotone table in ``log r``.
    """

    base_modulus: ModulusSpec
    quadrature_tolerance: float = 1e-8
    closed_form_asymptote: bool = False
    _table: tuple | None = field(default=None, init=False, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False, compare=False)

    def asymptote(self, r):
        """Leading-order growth; ``|log r|**(2b+1) / (2b+1)`` for log-power moduli."""
        m = self.base_modulus
        r = np.asarray(r, dtype=float)
        if m.kind == "log-power":
            b = m.exponent
            return np.log(r) ** (2 * b + 1) / (2 * b + 1)
        if m.kind == "holder":
            g = m.exponent
            return r ** (2 * g) / (2 * g)
        raise DomainError("no closed-form asymptote for this modulus kind")

    def _build_table(self, x_max):
        step = 0.02
        x0 = math.log(2.0)
        xs = np.unique(np.concatenate([
            np.linspace(0.0, x0, 41),
            x0 + step * np.arange(1, int(math.ceil((x_max - x0) / step)) + 2),
        ]))
        ys = np.array([eval_theta(self, math.exp(x)) for x in xs])
        return xs, ys, PchipInterpolator(xs, ys, extrapolate=False)

    def table(self, x_max):
        with self._lock:
            tab = self._table
            if tab is None or tab[0][-1] < x_max:
                grow = max(x_max, 2.0 * tab[0][-1] if tab is not None else x_max, 12.0)
                tab = self._build_table(grow)
                self._table = tab
            return tab

    def __call__(self, r):
        r_arr = np.asarray(r, dtype=float)
        out = np.zeros_like(r_arr)
        big = r_arr > 1.0
        if np.any(big):
            x = np.log(r_arr[big])
            _, _, interp = self.table(float(x.max()))
            out[big] = interp(x)
        if np.ndim(r) == 0:
            return float(out)
        return out


def eval_theta(weight: ThetaWeight, r: float) -> float:
    """Quadrature value of the theta weight at a single radius.

    Uses ``u = log s``; past ``s = r/2`` the capped modulus makes the
    integrand constant, so that piece is added exactly.
    """
    if r < 0:
        raise DomainError("theta evaluated at negative radius")
    if r <= 1.0:
        return 0.0
    m = weight.base_modulus
    log_r = math.log(r)
    u_cap = min(max(log_r + math.log(m.cap_radius), 0.0), log_r)
    tail = (log_r - u_cap) / m.cap_value**2
    if u_cap <= 0.0:
        return tail
    f = lambda u: eval_modulus(m, math.exp(u - log_r)) ** -2
    head, _ = _quad(f, 0.0, u_cap, weight.quadrature_tolerance)
    return head + tail


def theta_lower_bound_constant(weight: ThetaWeight, r_grid) -> float:
    """Largest C with ``theta(r) >= C |log r|**(3 + delta)`` on the grid, delta = 2(b-1)."""
    m = weight.base_modulus
    if m.kind != "log-power":
        raise DomainError("lower bound is stated for log-power weights")
    delta = 2.0 * (m.exponent - 1.0)
    r_grid = np.asarray(r_grid, dtype=float)
    if np.any(r_grid < 2):
        raise DomainError("lower bound is stated for r >= 2")
    vals = np.array([eval_theta(weight, r) for r in r_grid])
    return float(np.min(vals / np.log(r_grid) ** (3.0 + delta)))


def square_dini_constant(alpha: float, beta: float, rtol: float = 1e-10) -> float:
    """``int_0^inf varpi(r)**2 / (r tilde_omega(r)**2) dr`` with log-power moduli.

    ``varpi`` has exponent alpha, ``omega`` exponent beta; finiteness needs
    ``alpha > 3/2`` and ``1 < beta < alpha - 1/2``.
    """
    if not alpha > 1.5:
        raise DomainError(f"alpha={alpha} must exceed 3/2")
    if not 1.0 < beta < alpha - 0.5:
        raise DomainError(f"beta={beta} must satisfy 1 < beta < alpha - 1/2 = {alpha - 0.5}")
    varpi = ModulusSpec("log-power", alpha)
    omega = ModulusSpec("log-power", beta)

    def ratio(r):
        return eval_modulus(varpi, r) ** 2 / eval_tilde_omega(omega, r) ** 2

    # middle pieces in u = log r; the tails in t = log|log r| so the
    # algebraic decay in |log r| becomes exponential in t
    lc = -math.log(CAP_RADIUS)
    mid = lambda u: ratio(math.exp(u))
    # r = exp(-e^t) < 1/2: (|log r|^-alpha / |log r|^-beta)^2 |log r|
    low = lambda t: math.exp(t * (1.0 - 2.0 * (alpha - beta)))
    # r = exp(e^t) > 2: varpi capped, tilde-omega = 1 / omega(1/r)
    high = lambda t: varpi.cap_value**2 * math.exp(t * (1.0 - 2.0 * beta))
    t0 = math.log(lc)
    total = 0.0
    for f, a, b in ((mid, -lc, lc), (low, t0, np.inf), (high, t0, np.inf)):
        value, _ = _quad(f, a, b, rtol, limit=500)
        total += value
    if not np.isfinite(total):
        raise QuadratureError("square-Dini integral diverged", total, np.inf)
    return total


def fit_theta_exponent(weight: ThetaWeight, k, deviation):
    """Least-squares slope of ``log(deviation)`` against ``log(theta(|k|))``.

    Returns ``(a, log_c, residual_rms)`` for the model ``deviation = c theta**(-a)``.
    """
    k = np.abs(np.asarray(k, dtype=complex))
    dev = np.asarray(deviation, dtype=float)
    th = np.array([eval_theta(weight, float(x)) for x in k])
    keep = (dev > 0) & (th > 0)
    if keep.sum() < 2:
        raise DomainError("need at least two positive points to fit")
    X = np.log(th[keep])
    Y = np.log(dev[keep])
    slope, intercept = np.polyfit(X, Y, 1)
    resid = Y - (slope * X + intercept)
    return float(-slope), float(intercept), float(np.sqrt(np.mean(resid**2)))
