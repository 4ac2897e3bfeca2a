import numpy as np
import pytest

from calderon_dini.field import (
    Field,
    GridSpec,
    SpectralField,
    beurling_T,
    cauchy_P,
    d,
    d_bar,
    d_x,
    d_y,
    e_k,
    from_spectral,
    read_field,
    smooth_step,
    to_spectral,
    window,
    write_field,
)


def periodized_gaussian(grid, images=2):
    """``sum_n exp(-|z - 2 L n|^2)`` with its exact dbar and d."""
    u = np.zeros(grid.z.shape, dtype=complex)
    du = np.zeros_like(u)
    dbu = np.zeros_like(u)
    for a in range(-images, images + 1):
        for b in range(-images, images + 1):
            w = grid.z - 2 * grid.L * complex(a, b)
            g = np.exp(-np.abs(w) ** 2)
            u += g
            dbu += -w * g
            du += -np.conj(w) * g
    return Field(grid, u), Field(grid, du), Field(grid, dbu)


def rel(a, b):
    return np.linalg.norm(a.samples - b.samples) / np.linalg.norm(b.samples)


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(100, 4.0)
    with pytest.raises(ValueError):
        GridSpec(64, -1.0)


def test_constant_mass_at_zero(grid256):
    F = to_spectral(grid256.field(np.ones((256, 256))))
    c = np.abs(F.coefficients)
    assert c[0, 0] > 0
    c[0, 0] = 0
    assert c.max() < 1e-12 * np.abs(F.coefficients[0, 0])


def test_roundtrip_and_plancherel(grid256, rng):
    f = grid256.field(rng.normal(size=(256, 256)) + 1j * rng.normal(size=(256, 256)))
    F = to_spectral(f)
    assert isinstance(F, SpectralField)
    assert rel(from_spectral(F), f) < 1e-12
    assert F.norm() == pytest.approx(f.norm(), rel=1e-12)


def test_wirtinger_derivatives(grid256):
    u, du, dbu = periodized_gaussian(grid256)
    assert rel(d_bar(u), dbu) < 1e-8
    assert rel(d(u), du) < 1e-8
    assert rel(d_x(u) + 1j * d_y(u), 2 * dbu) < 1e-8
    assert d_bar(grid256.field(np.full((256, 256), 3.0))).sup() < 1e-12


def test_beurling_isometry(grid256, rng):
    g = rng.normal(size=(256, 256)) + 1j * rng.normal(size=(256, 256))
    g = grid256.field(g - g.mean())
    assert beurling_T(g).norm() == pytest.approx(g.norm(), rel=1e-10)


def test_beurling_single_frequency(grid256):
    g = grid256
    f = Field(g, np.exp(2j * np.pi * (3 * g.z.real + 5 * g.z.imag) / (2 * g.L)))
    zeta = complex(3, 5) / (2 * g.L)
    out = beurling_T(f)
    assert np.allclose(out.samples, f.samples * np.conj(zeta) / zeta, atol=1e-12)


def test_cauchy_zero_field(grid256):
    assert cauchy_P(grid256.zeros()).sup() == 0.0


def test_e_k_properties(grid256):
    assert np.allclose(e_k(grid256, 0).samples, 1.0)
    for k in (1.0, 3 - 2j, 20j):
        ek = e_k(grid256, k)
        assert np.allclose(np.abs(ek.samples), 1.0, atol=1e-14)
        assert np.allclose((ek * e_k(grid256, -k)).samples, 1.0, atol=1e-13)


def test_smooth_step_and_window(grid256):
    t = np.linspace(-1, 2, 301)
    s = smooth_step(t)
    assert s[0] == 0 and s[-1] == 1 and np.all(np.diff(s) >= 0)
    w = window(grid256, 1.0, 2.0).samples
    r = np.abs(grid256.z)
    assert np.all(w[r <= 1.0] == 1) and np.all(w[r >= 2.0] == 0)


def test_field_file_roundtrip(tmp_path, rng):
    g = GridSpec(32, 2.0)
    f = g.field(rng.normal(size=(32, 32)) + 1j * rng.normal(size=(32, 32)))
    write_field(tmp_path / "f.bin", f, "mu")
    back, kind = read_field(tmp_path / "f.bin")
    assert kind == "mu" and back.grid == g
    assert np.array_equal(back.samples, f.samples)


def test_field_file_truncated(tmp_path):
    g = GridSpec(32, 2.0)
    write_field(tmp_path / "f.bin", g.zeros())
    raw = (tmp_path / "f.bin").read_bytes()
    (tmp_path / "f.bin").write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        read_field(tmp_path / "f.bin")


def test_grid_mismatch_rejected():
    with pytest.raises(ValueError):
        GridSpec(32, 2.0).zeros() + GridSpec(64, 2.0).zeros()


def test_pad_product_matches_plain_for_low_band(rng):
    g = GridSpec(64, 2.0)
    f = g.field(np.exp(2j * np.pi * 3 * g.z.real / (2 * g.L)) * np.ones((64, 64)))
    h = g.field(np.exp(-2j * np.pi * 5 * g.z.imag / (2 * g.L)) * np.ones((64, 64)))
    from calderon_dini.field import pad_product

    assert np.allclose(pad_product(f, h).samples, (f * h).samples, atol=1e-12)
    # a product that aliases on the plain grid is truncated, not wrapped, by padding
    hi = g.field(np.exp(2j * np.pi * 20 * g.z.real / (2 * g.L)) * np.ones((64, 64)))
    assert pad_product(hi, hi).sup() < 1e-12
    assert (hi * hi).sup() == pytest.approx(1.0)
