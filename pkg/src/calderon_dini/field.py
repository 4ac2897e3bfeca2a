"""Complex fields on a periodic square grid and their Fourier multipliers.

Conventions
-----------
The grid covers ``[-L, L)^2`` with ``N`` points per side, spacing
``h = 2L/N``; array index ``[m, j]`` holds the sample at
``x = -L + j h``, ``y = -L + m h`` (rows run along y).

The forward transform approximates ``f^(xi) = int f(x) exp(-2 pi i x.xi) dx``
at ``xi = n / (2L)``::

    F[n] = h^2 * sum_x f(x) exp(-2 pi i x.xi_n)

so that ``sqrt(h^2 sum |f|^2) == sqrt(dxi^2 sum |F|^2)`` with
``dxi = 1/(2L)``. Coefficients are kept in numpy FFT order. Every
multiplier below is derived from the derivative symbols of this single
convention:

    d/dx -> 2 pi i xi_1,   dbar -> pi i (xi_1 + i xi_2),   d -> pi i (xi_1 - i xi_2)
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft


@dataclass(frozen=True)
class GridSpec:
    N: int = 512
    L: float = 4.0

    def __post_init__(self):
        if self.N < 32 or self.N & (self.N - 1):
            raise ValueError(f"N={self.N} must be a power of two >= 32")
        if self.L < 2:
            raise ValueError(f"L={self.L} must be >= 2")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def dxi(self) -> float:
        return 1.0 / (2.0 * self.L)

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    @cached_property
    def z(self) -> np.ndarray:
        x = self.axis
        return x[None, :] + 1j * x[:, None]

    @cached_property
    def freq_index(self) -> np.ndarray:
        return np.fft.fftfreq(self.N, d=1.0 / self.N)

    @cached_property
    def zeta(self) -> np.ndarray:
        """``xi_1 + i xi_2`` on the FFT-ordered frequency lattice."""
        xi = self.freq_index * self.dxi
        return xi[None, :] + 1j * xi[:, None]

    @cached_property
    def _phase(self) -> np.ndarray:
        # exp(-2 pi i (-L) xi_n) per axis = (-1)^n
        s = np.where(self.freq_index.astype(int) % 2 == 0, 1.0, -1.0)
        return s[None, :] * s[:, None]

    def field(self, values) -> "Field":
        return Field(self, np.broadcast_to(np.asarray(values, dtype=complex), (self.N, self.N)).copy())

    def zeros(self) -> "Field":
        return Field(self, np.zeros((self.N, self.N), dtype=complex))

    def lattice_shift(self, y: complex) -> tuple[int, int]:
        """Integer (column, row) shift for a lattice vector; rejects off-lattice y."""
        sx, sy = y.real / self.h, y.imag / self.h
        jx, jy = round(sx), round(sy)
        if abs(sx - jx) > 1e-9 or abs(sy - jy) > 1e-9:
            raise ValueError(f"shift {y} is not a lattice vector (h={self.h})")
        return int(jx), int(jy)


@dataclass(frozen=True, eq=False)
class Field:
    grid: GridSpec
    samples: np.ndarray

    def __post_init__(self):
        n = self.grid.N
        if self.samples.shape != (n, n):
            raise ValueError(f"expected {(n, n)} samples, got {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("field samples must be finite")

    def _wrap(self, values):
        return Field(self.grid, np.asarray(values, dtype=complex))

    def _other(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.samples
        return other

    def __add__(self, other):
        return self._wrap(self.samples + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.samples - self._other(other))

    def __rsub__(self, other):
        return self._wrap(self._other(other) - self.samples)

    def __mul__(self, other):
        return self._wrap(self.samples * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._wrap(self.samples / self._other(other))

    def __neg__(self):
        return self._wrap(-self.samples)

    def conj(self) -> "Field":
        return self._wrap(self.samples.conj())

    def norm(self) -> float:
        """Discrete L2 norm ``sqrt(h^2 sum |f|^2)``."""
        return float(self.grid.h * np.linalg.norm(self.samples))

    def sup(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def mean(self) -> complex:
        return complex(self.samples.mean())


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: GridSpec
    coefficients: np.ndarray

    def __post_init__(self):
        n = self.grid.N
        if self.coefficients.shape != (n, n):
            raise ValueError(f"expected {(n, n)} coefficients, got {self.coefficients.shape}")

    def norm(self) -> float:
        return float(self.grid.dxi * np.linalg.norm(self.coefficients))

    @property
    def xi_abs(self) -> np.ndarray:
        return np.abs(self.grid.zeta)


def to_spectral(f: Field) -> SpectralField:
    g = f.grid
    return SpectralField(g, g.h**2 * g._phase * sfft.fft2(f.samples, workers=-1))


def from_spectral(F: SpectralField) -> Field:
    g = F.grid
    return Field(g, sfft.ifft2(F.coefficients * g._phase, workers=-1) / g.h**2)


def apply_multiplier(f: Field, symbol: np.ndarray) -> Field:
    # the phase factor cancels for diagonal operators
    return Field(f.grid, sfft.ifft2(sfft.fft2(f.samples, workers=-1) * symbol, workers=-1))


def dbar_symbol(grid: GridSpec) -> np.ndarray:
    return np.pi * 1j * grid.zeta


def d_symbol(grid: GridSpec) -> np.ndarray:
    return np.pi * 1j * grid.zeta.conj()


def beurling_symbol(grid: GridSpec) -> np.ndarray:
    zeta = grid.zeta
    out = np.zeros_like(zeta)
    nz = zeta != 0
    out[nz] = d_symbol(grid)[nz] / dbar_symbol(grid)[nz]
    return out


def cauchy_symbol(grid: GridSpec) -> np.ndarray:
    zeta = grid.zeta
    out = np.zeros_like(zeta)
    nz = zeta != 0
    out[nz] = 1.0 / dbar_symbol(grid)[nz]
    return out


def d_bar(f: Field) -> Field:
    """Spectral ``(d_x + i d_y)/2``; exact on band-limited periodic fields."""
    return apply_multiplier(f, dbar_symbol(f.grid))


def d(f: Field) -> Field:
    """Spectral ``(d_x - i d_y)/2``."""
    return apply_multiplier(f, d_symbol(f.grid))


def d_x(f: Field) -> Field:
    return apply_multiplier(f, 2j * np.pi * f.grid.zeta.real)


def d_y(f: Field) -> Field:
    return apply_multiplier(f, 2j * np.pi * f.grid.zeta.imag)


def beurling_T(f: Field) -> Field:
    """Beurling transform: unimodular multiplier with ``T(dbar u) = d u``; kills the mean."""
    return apply_multiplier(f, beurling_symbol(f.grid))


def cauchy_P(f: Field) -> Field:
    """Periodic Cauchy transform: ``dbar(P f) = f - mean(f)``, ``P f`` has zero mean."""
    return apply_multiplier(f, cauchy_symbol(f.grid))


def e_k(grid: GridSpec, k: complex) -> Field:
    """The character ``exp(i (k z + conj(k z)))`` sampled on the grid."""
    return Field(grid, np.exp(2j * np.real(k * grid.z)))


def e_k_at(w: np.ndarray, k: complex) -> np.ndarray:
    """``e_k`` evaluated at arbitrary complex points ``w``."""
    return np.exp(2j * np.real(k * np.asarray(w)))


def pad_product(f: Field, g: Field) -> Field:
    """Dealiased pointwise product via 3/2 zero padding (convergence studies only)."""
    n = f.grid.N
    m = 3 * n // 2
    def up(a):
        A = np.fft.fftshift(sfft.fft2(a))
        P = np.zeros((m, m), dtype=complex)
        o = (m - n) // 2
        P[o:o + n, o:o + n] = A
        return sfft.ifft2(np.fft.ifftshift(P)) * (m / n) ** 2
    prod = up(f.samples) * up(g.samples)
    B = np.fft.fftshift(sfft.fft2(prod))
    o = (m - n) // 2
    return Field(f.grid, sfft.ifft2(np.fft.ifftshift(B[o:o + n, o:o + n])) * (n / m) ** 2)


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    def psi(x):
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = np.exp(-1.0 / x[pos])
        return out
    a, b = psi(t), psi(1.0 - t)
    return a / (a + b)


def window(grid: GridSpec, inner: float, outer: float) -> Field:
    """Radial C-infinity window: 1 for |z| <= inner, 0 for |z| >= outer."""
    r = np.abs(grid.z)
    return Field(grid, 1.0 - smooth_step((r - inner) / (outer - inner)) + 0j)


def write_field(path, f: Field, kind: str = "field") -> None:
    """Text header ``N L kind`` then N^2 little-endian float64 (re, im) pairs."""
    g = f.grid
    if any(c.isspace() for c in kind):
        raise ValueError("kind must be a single token")
    with open(path, "wb") as fh:
        fh.write(f"{g.N} {g.L!r} {kind}\n".encode("ascii"))
        data = np.empty((g.N * g.N, 2), dtype="<f8")
        flat = f.samples.reshape(-1)
        data[:, 0] = flat.real
        data[:, 1] = flat.imag
        fh.write(data.tobytes())


def read_field(path) -> tuple[Field, str]:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if len(header) != 3:
            raise ValueError(f"bad field header {header!r}")
        n, L, kind = int(header[0]), float(header[1]), header[2]
        raw = fh.read()
    if len(raw) != n * n * 16:
        raise ValueError(f"expected {n * n * 16} payload bytes, got {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8").reshape(n * n, 2)
    grid = GridSpec(n, L)
    return Field(grid, (data[:, 0] + 1j * data[:, 1]).reshape(n, n)), kind
