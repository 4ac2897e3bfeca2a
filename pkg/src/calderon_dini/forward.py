"""Conductivity equation on the unit disk and its Dirichlet-to-Neumann map.

The DtN map is represented in the boundary basis ``e^{i n theta}``,
``|n| <= N_b``: entry ``[m, n]`` is the m-th Fourier coefficient of the
flux ``gamma du/dr`` produced by the Dirichlet data ``e^{i n theta}``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import splu

from .field import Field
from .harness.generators import Conductivity
from .modulus import DomainError


@dataclass(frozen=True, eq=False)
class DtnMatrix:
    modes: int
    entries: np.ndarray
    mesh: tuple

    def __post_init__(self):
        m = 2 * self.modes + 1
        if self.entries.shape != (m, m):
            raise ValueError(f"expected {(m, m)} entries, got {self.entries.shape}")

    @property
    def n(self) -> np.ndarray:
        return np.arange(-self.modes, self.modes + 1)

    def entry(self, m: int, n: int) -> complex:
        return complex(self.entries[m + self.modes, n + self.modes])

    def asymmetry(self) -> float:
        """``||A - A^*||`` in the weighted operator norm."""
        return dtn_opnorm_diff(self, DtnMatrix(self.modes, self.entries.conj().T, self.mesh))


def conductivity_sampler(c):
    """Callable ``z -> gamma(z)``: the analytic profile if attached, else bilinear interpolation."""
    if isinstance(c, Conductivity) and c.profile is not None:
        return lambda z: np.real(c.profile(z))
    gamma = c.gamma if isinstance(c, Conductivity) else c
    if isinstance(gamma, Field):
        ax = gamma.grid.axis
        interp = RegularGridInterpolator((ax, ax), gamma.samples.real, method="linear",
                                         bounds_error=False, fill_value=1.0)
        return lambda z: interp(np.stack([np.imag(z), np.real(z)], axis=-1))
    if callable(gamma):
        return lambda z: np.real(gamma(z))
    raise DomainError("cannot sample this conductivity")


def _harmonic(a, b):
    return 2.0 * a * b / (a + b)


def _assemble_system(gam_nodes, gam_center, n_r, n_t):
    """Symmetric positive definite matrix of the polar finite-volume scheme.

    Unknowns: the centre node, then rings i = 1..n_r-1 (row-major in theta).
    Returns the matrix and the coupling of ring n_r-1 to the boundary ring.
    """
    dr = 1.0 / n_r
    dt = 2.0 * np.pi / n_t
    r = dr * np.arange(n_r + 1)
    n_unk = 1 + (n_r - 1) * n_t
    idx = lambda i, j: 1 + (i - 1) * n_t + (j % n_t)

    rows, cols, vals = [], [], []
    diag = np.zeros(n_unk)

    def couple(p, q, w):
        rows.extend((p, q))
        cols.extend((q, p))
        vals.extend((-w, -w))
        diag[p] += w
        diag[q] += w

    # radial faces between ring i and i+1 (ring 0 is the centre)
    g_face_c = _harmonic(gam_center, gam_nodes[1])
    w_c = r[0] + 0.5 * dr
    for j in range(n_t):
        couple(0, idx(1, j), w_c * g_face_c[j] * dt / dr)
    bnd_w = np.zeros(n_t)
    for i in range(1, n_r):
        gf = _harmonic(gam_nodes[i], gam_nodes[i + 1])
        w = (r[i] + 0.5 * dr) * gf * dt / dr
        if i + 1 < n_r:
            p = 1 + (i - 1) * n_t + np.arange(n_t)
            q = p + n_t
            rows.extend(p); cols.extend(q); vals.extend(-w)
            rows.extend(q); cols.extend(p); vals.extend(-w)
            diag[p] += w
            diag[q] += w
        else:
            p = 1 + (i - 1) * n_t + np.arange(n_t)
            diag[p] += w
            bnd_w = w
        # angular faces on ring i
        ga = _harmonic(gam_nodes[i], np.roll(gam_nodes[i], -1))
        wa = ga * dr / (r[i] * dt)
        p = 1 + (i - 1) * n_t + np.arange(n_t)
        q = 1 + (i - 1) * n_t + (np.arange(n_t) + 1) % n_t
        rows.extend(p); cols.extend(q); vals.extend(-wa)
        rows.extend(q); cols.extend(p); vals.extend(-wa)
        diag[p] += wa
        diag[q] += wa
    rows.extend(range(n_unk)); cols.extend(range(n_unk)); vals.extend(diag)
    A = sparse.csc_matrix((np.asarray(vals, dtype=float), (np.asarray(rows), np.asarray(cols))),
                          shape=(n_unk, n_unk))
    return A, bnd_w


def _dtn_single(sample, modes, n_r, n_t):
    dr = 1.0 / n_r
    theta = 2.0 * np.pi * np.arange(n_t) / n_t
    r = dr * np.arange(n_r + 1)
    zz = r[:, None] * np.exp(1j * theta)[None, :]
    gam_nodes = sample(zz)
    gam_center = float(np.asarray(sample(np.array([0j])))[0])
    if np.any(gam_nodes <= 0) or gam_center <= 0:
        raise DomainError("conductivity must be positive on the mesh")
    A, bnd_w = _assemble_system(gam_nodes, gam_center, n_r, n_t)
    lu = splu(A)
    ns = np.arange(-modes, modes + 1)
    g = np.exp(1j * np.outer(theta, ns))  # boundary data, one column per mode
    rhs = np.zeros((A.shape[0], ns.size), dtype=complex)
    last = 1 + (n_r - 2) * n_t + np.arange(n_t)
    rhs[last] = bnd_w[:, None] * g
    u = lu.solve(rhs.real) + 1j * lu.solve(rhs.imag)
    if not np.all(np.isfinite(u)):
        raise RuntimeError("sparse solve produced non-finite values")
    u1 = u[last]
    u2 = u[last - n_t] if n_r > 2 else np.repeat(u[:1], n_t, axis=0)
    flux = gam_nodes[n_r][:, None] * (3.0 * g - 4.0 * u1 + u2) / (2.0 * dr)
    coef = sfft.fft(flux, axis=0) / n_t
    return coef[ns % n_t, :]


def dtn_assemble(c, N_b: int, mesh=(256, 512), richardson: bool = False) -> DtnMatrix:
    """Assemble the DtN matrix on a polar mesh ``(radial intervals, angular points)``.

    Finite volumes with harmonic face averages of gamma, a flux-balance
    centre node, and the one-sided three-point flux at r = 1.  With
    ``richardson=True`` the result is ``(4 L_mesh - L_{mesh/2}) / 3``,
    which cancels the leading second-order error.
    """
    n_r, n_t = mesh
    if N_b < 0:
        raise DomainError("N_b must be nonnegative")
    if n_t < 8 * N_b:
        raise DomainError(f"angular resolution {n_t} does not resolve {N_b} modes (need >= {8 * N_b})")
    if n_r < 3:
        raise DomainError("need at least three radial intervals")
    if isinstance(c, Conductivity):
        # the input contract: gamma = 1 near the boundary circle
        if c.boundary_radius >= 1:
            raise DomainError("conductivity must equal 1 near the boundary")
    sample = conductivity_sampler(c)
    L = _dtn_single(sample, N_b, n_r, n_t)
    if richardson:
        if n_r % 2 or n_t % 2 or n_t // 2 < 8 * N_b:
            raise DomainError("Richardson needs an even mesh whose half still resolves the modes")
        L = (4.0 * L - _dtn_single(sample, N_b, n_r // 2, n_t // 2)) / 3.0
    return DtnMatrix(N_b, L, (n_r, n_t))


def sobolev_weights(modes: int) -> np.ndarray:
    n = np.arange(-modes, modes + 1)
    return (1.0 + n.astype(float) ** 2) ** -0.25


def dtn_opnorm_diff(A: DtnMatrix, B: DtnMatrix) -> float:
    """``||A - B||`` from H^{1/2} to H^{-1/2}: largest singular value of ``D (A - B) D``."""
    if A.modes != B.modes:
        raise ValueError("DtN matrices have different mode counts")
    d = sobolev_weights(A.modes)
    M = d[:, None] * (A.entries - B.entries) * d[None, :]
    if not np.any(M):
        return 0.0
    return float(np.linalg.norm(M, 2))


def write_dtn(path, A: DtnMatrix) -> None:
    """Header ``N_b mesh_r mesh_theta`` then row-major little-endian complex128."""
    with open(path, "wb") as fh:
        fh.write(f"{A.modes} {A.mesh[0]} {A.mesh[1]}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(A.entries, dtype="<c16").tobytes())


def read_dtn(path) -> DtnMatrix:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if len(header) != 3:
            raise ValueError(f"bad DtN header {header!r}")
        nb, mr, mt = (int(x) for x in header)
        raw = fh.read()
    m = 2 * nb + 1
    if len(raw) != m * m * 16:
        raise ValueError(f"expected {m * m * 16} payload bytes, got {len(raw)}")
    return DtnMatrix(nb, np.frombuffer(raw, dtype="<c16").reshape(m, m).copy(), (mr, mt))


# --------------------------------------------------------------------------
# CGO solutions of the conductivity equation

def cgo_to_u(f_plus: Field, f_minus: Field) -> Field:
    """``u = Re f_mu + i Im f_{-mu}``."""
    if f_plus.grid != f_minus.grid:
        raise ValueError("fields live on different grids")
    return Field(f_plus.grid, f_plus.samples.real + 1j * f_minus.samples.imag)


def _grad_from_wirtinger(df, dbf):
    """Gradient ``(f_x, f_y)`` from ``d f`` and ``dbar f``."""
    return df + dbf, 1j * (df - dbf)


def conductivity_weak_residual(gamma: Field, plus, minus, centers=None, width: float = 0.25) -> float:
    """Weak residual of ``div(gamma grad u) = 0`` for ``u = Re f_mu + i Im f_{-mu}``.

    ``plus``/``minus`` are CgoPhase solutions for mu and -mu.  Gradients
    come from the chain rule; the test functions are Gaussians of the
    given width centred inside the disk.  Returns the largest
    ``|int gamma grad u . grad v| / int |gamma grad u| |grad v|``.
    """
    g = gamma.grid
    _, dfp, dbfp = plus.derivatives()
    _, dfm, dbfm = minus.derivatives()
    px, py = _grad_from_wirtinger(dfp.samples, dbfp.samples)
    mx, my = _grad_from_wirtinger(dfm.samples, dbfm.samples)
    ux = px.real + 1j * mx.imag
    uy = py.real + 1j * my.imag
    gam = gamma.samples.real
    if centers is None:
        centers = [0j, 0.3, 0.3j, -0.25 - 0.2j, 0.15 - 0.35j]
    worst = 0.0
    for c in centers:
        dz = g.z - c
        v = np.exp(-np.abs(dz) ** 2 / width**2)
        vx, vy = -2.0 * dz.real / width**2 * v, -2.0 * dz.imag / width**2 * v
        num = abs(np.sum(gam * (ux * vx + uy * vy)))
        den = np.sum(gam * np.hypot(np.abs(ux), np.abs(uy)) * np.hypot(vx, vy))
        worst = max(worst, num / den)
    return float(worst)
