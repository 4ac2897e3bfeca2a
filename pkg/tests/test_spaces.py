import math

import numpy as np
import pytest
from scipy import special

from calderon_dini import spaces
from calderon_dini.field import Field, GridSpec, e_k, window
from calderon_dini.harness.generators import make_dini_mu
from calderon_dini.modulus import DomainError, ModulusSpec, ThetaWeight, eval_modulus, eval_theta, square_dini_constant

W12 = ThetaWeight(ModulusSpec("log-power", 1.2))
VARPI = ModulusSpec("log-power", 2.0)


@pytest.fixture(scope="module")
def dini_mu():
    return make_dini_mu(2.0, 0.3, grid=GridSpec(256, 4.0))


# --- L2 modulus and weighted norms -------------------------------------------

def test_l2_modulus_zero_shift(grid256):
    assert spaces.l2_modulus(e_k(grid256, 1.0), 0j) == 0.0


def test_l2_modulus_two_ways(grid256):
    f = e_k(grid256, 0.25 * math.pi)  # lattice frequency
    h = grid256.h
    for y in (h, 3j * h, complex(5 * h, -2 * h)):
        a = spaces.l2_modulus(f, y)
        b = spaces.l2_modulus_spectral(f, y)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


def test_l2_modulus_bounded_by_varpi(dini_mu):
    mu = dini_mu
    g = mu.grid
    semi = mu.gamma_norm - mu.kappa
    area = math.sqrt(2 * math.pi * 0.8**2)  # support plus its translate
    rng = np.random.default_rng(3)
    for _ in range(20):
        a, b = rng.integers(-40, 41, size=2)
        if a == b == 0:
            continue
        y = complex(a * g.h, b * g.h)
        assert spaces.l2_modulus(mu.mu, y) <= area * eval_modulus(VARPI, abs(y)) * semi


def test_w_theta_bandlimited_and_zero(grid256):
    f = spaces.band_limit(Field(grid256, np.exp(-np.abs(grid256.z) ** 2) + 0j), 1.0)
    assert spaces.w_theta_norm(f, W12) == pytest.approx(f.norm(), rel=1e-12)
    assert spaces.w_theta_norm(grid256.zeros(), W12) == 0.0


def test_w_theta_bounded_by_square_dini(dini_mu):
    c = square_dini_constant(2.0, 1.2)
    assert spaces.w_theta_norm(dini_mu.mu, W12) ** 2 <= c * dini_mu.gamma_norm**2


def test_spectral_tail(grid256):
    f = Field(grid256, np.exp(-np.abs(grid256.z) ** 2) + 0j)
    tail0 = spaces.spectral_tail(f, W12, 4.0, 0.0)
    assert tail0 <= spaces.spectral_tail_bound(f, W12, 4.0, 0.0)
    assert spaces.spectral_tail_bound(f, W12, 4.0, 1.0) == pytest.approx(spaces.w_theta_norm(f, W12) ** 2)
    low = spaces.band_limit(f, 2.0)
    assert spaces.spectral_tail(low, W12, 4.0, 0.5) < 1e-28
    with pytest.raises(DomainError):
        spaces.spectral_tail(f, W12, 1.0, 0.5)
    with pytest.raises(DomainError):
        spaces.spectral_tail(f, W12, 2.0, 1.5)


# --- I0 ------------------------------------------------------------------------

def test_i0_finite_at_one():
    v = spaces.i0_value(W12, 1.0)
    assert np.isfinite(v) and v == pytest.approx(66.37, rel=1e-3)


def test_i0_bessel_matches_2d_quadrature():
    # truncated to |y| < 2 so the 2-D trapezoid route stays cheap
    a = spaces.i_xi_truncated(W12, 3.0, 2.0, angular="trapezoid")
    b = spaces.i_xi_truncated(W12, 3.0, 2.0, angular="bessel")
    assert a == pytest.approx(b, rel=1e-8)


def test_i0_rotation_invariance():
    a = spaces.i_xi_truncated(W12, 3.0, 2.0)
    b = spaces.i_xi_truncated(W12, 3.0j, 2.0)
    assert a == pytest.approx(b, rel=1e-6)


def test_i0_ratio_band():
    prof = spaces.i0_profile(W12, [10.0, 100.0, 1e3, 1e4])
    ratios = [i0 / th for _, i0, th in prof]
    # frozen from the verified quadrature run
    assert ratios == pytest.approx([89.4, 37.8, 27.0, 22.6], rel=5e-3)
    c = spaces.equivalence_band(prof)
    assert 0 < c < 1


# --- seminorms -------------------------------------------------------------------

def test_seminorm_constant_and_linear(grid256, dini_mu):
    assert spaces.c_modulus_seminorm(Field(grid256, np.full((256, 256), 2.0 + 0j)), VARPI).value == 0.0
    s1 = spaces.c_modulus_seminorm(dini_mu.mu, VARPI, seed=1).value
    s2 = spaces.c_modulus_seminorm(dini_mu.mu * (3 - 4j), VARPI, seed=1).value
    assert s2 == pytest.approx(5 * s1, rel=1e-12)


def test_seminorm_of_generated_bump(dini_mu):
    target = dini_mu.gamma_norm - dini_mu.kappa
    rep = spaces.c_modulus_seminorm(dini_mu.mu, VARPI, seed=0)
    assert rep.method == "sampled-pairs" and rep.sample_seed == 0
    assert 0.5 * target <= rep.value <= target * (1 + 1e-12)


def test_sampled_never_exceeds_full():
    g = GridSpec(64, 2.0)
    mu = make_dini_mu(2.0, 0.3, grid=g)
    full = spaces.c_modulus_seminorm(mu.mu, VARPI, mode="full-pair-scan").value
    for seed in range(3):
        assert spaces.c_modulus_seminorm(mu.mu, VARPI, mode="sampled-pairs", seed=seed).value <= full * (1 + 1e-12)


def test_full_scan_refused_on_big_grid(dini_mu):
    with pytest.raises(DomainError):
        spaces.c_modulus_seminorm(dini_mu.mu, VARPI, mode="full-pair-scan")


# --- interpolation -----------------------------------------------------------------

SIGMA = ModulusSpec("integrated-log-power", 2.0)


def test_interpolation_zero_field():
    assert spaces.interpolation_bound(GridSpec(32, 2.0).zeros(), SIGMA) == (0.0, 0.0)


@pytest.mark.parametrize("a", [0.25, 0.5, 1.0])
def test_holder_interpolation(a):
    assert spaces.holder_interpolation_exponent(a) == pytest.approx(a / (1 + a), abs=1e-12)
    # closed form 2 A^t B^(1-t)
    A, B = 1e-3, 2.0
    t = a / (1 + a)
    assert spaces.interpolation_rhs(A, B, ModulusSpec("holder", a)) == pytest.approx(2 * A**t * B ** (1 - t), rel=1e-10)


def test_zeta_inverse_roundtrip():
    for target in (1e-4, 1e-2, 0.3):
        r = spaces.zeta_inverse(SIGMA, target)
        assert eval_modulus(SIGMA, r) / r == pytest.approx(target, rel=1e-9) or r > 0


# --- oscillatory integral, kernel decay ------------------------------------------------

@pytest.mark.parametrize("s", [1.0, 2.0, 5.0, 10.0])
def test_oscillatory_integral_bessel(s):
    assert spaces.oscillatory_integral(s) == pytest.approx(math.pi * spaces.bessel_j0_series(2 * math.pi * s), abs=1e-8)


def test_bessel_series_independent_of_scipy():
    for x in (0.0, 1.0, 6.3, 31.4, 150.0):
        assert spaces.bessel_j0_series(x) == pytest.approx(special.j0(x), abs=1e-14)


def test_oscillatory_envelope():
    env = [max(abs(spaces.oscillatory_integral(s)) for s in np.arange(n, n + 1, 0.05)) for n in (2, 8, 32)]
    assert env[0] > env[1] > env[2]
    assert env[2] * math.sqrt(32) == pytest.approx(env[0] * math.sqrt(2), rel=0.1)


def test_cosine_gap_min():
    assert spaces.cosine_gap_integral(1.1) == pytest.approx(4.40776, abs=1e-5)
    with pytest.raises(DomainError):
        spaces.oscillatory_integral(0.5)


@pytest.mark.parametrize("z,l1", [(0j, 2.5), (1 + 0j, 2.0257), (2j, 0.8314)])
def test_kernel_transform_bounded_by_l1(z, l1, grid256):
    norm = spaces.kernel_l1_norm(z)
    assert norm == pytest.approx(l1, rel=1e-3)
    rep = spaces.kernel_fourier_decay(z, 32.0, grid256)
    assert rep.khat0 <= norm
    assert np.isfinite(rep.sup_ratio)
    assert len(rep.profile(10)) > 0


def test_kernel_outside_support_decays_fast():
    rep = spaces.kernel_fourier_decay(-4 + 0j, 64.0, GridSpec(512, 4.0))
    band = lambda a, b: rep.khat_abs[(rep.xi >= a) & (rep.xi <= b)].max()
    low, mid, high = band(2, 4), band(8, 10), band(40, 44)
    assert high < 1e-6 * low
    # even weighted by |xi|^4 the tail keeps shrinking
    assert high * 44**4 < mid * 8**4


def test_kernel_rejects_points_off_cell(grid256):
    with pytest.raises(DomainError):
        spaces.kernel_fourier_decay(5 + 0j, 32.0, grid256)
