import math

import numpy as np
import pytest

from calderon_dini import beltrami as bel
from calderon_dini.field import Field, GridSpec, d, d_bar, window
from calderon_dini.harness.generators import make_dini_mu
from calderon_dini.modulus import DomainError, ModulusSpec, ThetaWeight, eval_theta, square_dini_constant

G = GridSpec(256, 4.0)


@pytest.fixture(scope="module")
def mu03():
    return make_dini_mu(2.0, 0.3, grid=G)


@pytest.fixture(scope="module")
def mu05():
    return make_dini_mu(2.0, 0.5, grid=G)


# --- coefficients --------------------------------------------------------------

def test_mu_from_constant_gamma():
    one = Field(G, np.ones((G.N, G.N), dtype=complex))
    assert bel.mu_from_gamma(one).mu.sup() == 0.0
    g = GridSpec(32, 2.0)
    three = Field(g, np.full((32, 32), 3.0 + 0j))
    with pytest.raises(DomainError):
        bel.mu_from_gamma(three)  # -1/2 everywhere, not supported in the disk
    m = (1 - 3.0) / (1 + 3.0)
    assert m == -0.5


def test_gamma_mu_roundtrip(mu03):
    gam = bel.gamma_from_mu(mu03)
    back = bel.mu_from_gamma(Field(G, gam.samples.real + 0j), gamma_norm=1.0)
    assert np.max(np.abs(back.mu.samples - mu03.mu.samples)) <= 1e-14


def test_gamma_must_be_real_positive():
    g = Field(G, np.ones((G.N, G.N)) + 1e-3j)
    with pytest.raises(DomainError):
        bel.mu_from_gamma(g)
    with pytest.raises(DomainError):
        bel.mu_from_gamma(Field(G, -np.ones((G.N, G.N)) + 0j))


def test_coefficient_validation(mu03):
    with pytest.raises(DomainError):
        bel.BeltramiCoefficient(mu03.mu, 0.1)
    with pytest.raises(DomainError):
        bel.BeltramiCoefficient(Field(G, np.full((G.N, G.N), 0.1 + 0j)), 0.2)
    with pytest.raises(DomainError):
        bel.BeltramiCoefficient(G.zeros(), 1.0)


def test_make_dini_mu_exact_kappa(mu03):
    assert mu03.mu.sup() == pytest.approx(0.3, rel=1e-14)
    assert mu03.gamma_norm > mu03.kappa


# --- plane transforms -------------------------------------------------------------

def test_plane_cauchy_direct_quadrature():
    """Plane Cauchy transform of a bump vs a fine-grid singular sum on 16 probes."""
    g = GridSpec(64, 2.0)
    gf = GridSpec(512, 2.0)
    bump = lambda gr: np.exp(-np.abs(gr.z) ** 2 / 0.09) * window(gr, 0.9, 1.2).samples
    P = bel.plane_cauchy(Field(g, bump(g) + 0j)).samples
    bf = bump(gf)
    rng = np.random.default_rng(1)
    for m, j in rng.integers(16, 48, size=(16, 2)):
        dz = gf.z - g.z[m, j]
        with np.errstate(divide="ignore", invalid="ignore"):
            ker = np.where(np.abs(dz) < 1e-12, 0.0, 1.0 / dz)
        direct = -np.sum(bf * ker) * gf.h**2 / np.pi
        assert abs(P[m, j] - direct) <= 1e-3 * abs(direct)


def test_plane_transforms_invert_dbar():
    u = Field(G, np.exp(-np.abs(G.z) ** 2 / 0.25) * window(G, 2.0, 3.0).samples + 0j)
    assert np.max(np.abs(bel.plane_cauchy(d_bar(u)).samples - u.samples)) < 1e-8
    assert np.max(np.abs(bel.plane_beurling(d_bar(u)).samples - d(u).samples)) < 1e-8


# --- linear problem --------------------------------------------------------------------

def test_linear_zero_mu():
    sol = bel.solve_linear_cgo(bel.BeltramiCoefficient.zero(G), 4.0)
    assert np.array_equal(sol.psi.samples, G.z)
    assert sol.series_terms == [] and sol.sup_deviation == 0.0


def test_k_zero_rejected(mu03):
    with pytest.raises(DomainError):
        bel.solve_linear_cgo(mu03, 0)


def test_term_ratios_kappa_half(mu05):
    sol = bel.solve_linear_cgo(mu05, 4.0)
    assert sol.term_ratios.max() <= 0.5 + 0.05
    assert sol.residual < 1e-9


def test_series_budget_raises(mu05):
    with pytest.raises(bel.ConvergenceError) as exc:
        bel.solve_linear_cgo(mu05, 4.0, bel.SolverConfig(n_max=3))
    assert exc.value.iterations == 3


def test_tail_bound_closed_form():
    assert bel.tail_bound(0.5, 0.5, 10) == pytest.approx(math.sqrt(math.pi) * 0.5**10, rel=1e-14)
    assert bel.tail_bound(0.5, 0.5, 10) == pytest.approx(1.73e-3, rel=1e-2)


def test_decompose_edges(mu03):
    sol = bel.solve_linear_cgo(mu03, 4.0)
    g0, h0 = bel.decompose_g_h(sol, 0)
    assert g0.sup() == 0 and np.array_equal(h0.samples, sol.density.samples)
    g_all, h_all = bel.decompose_g_h(sol, len(sol.series_terms))
    assert h_all.sup() < 1e-14


@pytest.mark.parametrize("k", [4.0, 8.0])
def test_tail_bound_holds(mu03, k):
    sol = bel.solve_linear_cgo(mu03, k)
    for n0 in (4, 8, 12):
        _, h = bel.decompose_g_h(sol, n0)
        assert h.norm() <= bel.tail_bound(0.3, 0.3, n0)


def test_lowfreq_mass(mu03):
    assert bel.gk_lowfreq_mass(G.zeros(), 2.0) == 0.0
    w = ThetaWeight(ModulusSpec("log-power", 1.2))
    bound = bel.lowfreq_bound(4, square_dini_constant(2.0, 1.2), mu03.gamma_norm)
    for k in (4.0, 8.0, 16.0):
        g, _ = bel.decompose_g_h(bel.solve_linear_cgo(mu03, k), 4)
        m = bel.gk_lowfreq_mass(g, 2.0)
        assert m * eval_theta(w, k / 2) <= bound
        assert bel.gk_lowfreq_mass(g, 1.5) <= m


def test_linear_deviation_frozen(mu03):
    # values from the verified N=512 sweep; N=256 agrees to a few percent
    devs = [bel.solve_linear_cgo(mu03, k).sup_deviation for k in (4.0, 8.0, 16.0)]
    assert devs == pytest.approx([0.1096, 0.0464, 0.0233], rel=0.03)


# --- nonlinear problem ---------------------------------------------------------------

def test_nonlinear_zero_mu():
    ph = bel.solve_nonlinear_cgo(bel.BeltramiCoefficient.zero(G), 3 + 1j)
    assert np.array_equal(ph.phi.samples, G.z)
    f = ph.f().samples
    assert np.max(np.abs(f - np.exp(1j * (3 + 1j) * G.z))) <= 1e-12


@pytest.fixture(scope="module")
def phase4(mu03):
    return bel.solve_nonlinear_cgo(mu03, 4.0)


def test_nonlinear_residual(phase4):
    assert phase4.residual <= 1e-8
    assert float(np.max(np.abs(phase4.epsilon.samples))) == pytest.approx(0.1064, rel=0.03)


def test_chain_rule_beltrami_equation(phase4, mu03):
    f, df, dbf = phase4.derivatives()
    disk = np.abs(G.z) < 1
    assert bel.beltrami_residual(f, df, dbf, mu03.mu, disk) <= 1e-7


def test_fixed_point_method_agrees(mu03, phase4):
    fp = bel.solve_nonlinear_cgo(mu03, 4.0, bel.SolverConfig(method="fixed-point"))
    assert np.max(np.abs(fp.phi.samples - phase4.phi.samples)) < 1e-7


def test_outer_budget_raises(mu03):
    with pytest.raises(bel.ConvergenceError):
        bel.solve_nonlinear_cgo(mu03, 4.0, bel.SolverConfig(outer_max=2, method="fixed-point"))


def test_resolves():
    # 2|k|/pi against the Nyquist frequency N/(4L)
    assert bel.resolves(GridSpec(512, 4.0), 50)
    assert not bel.resolves(GridSpec(512, 4.0), 51)
    assert bel.resolves(GridSpec(2048, 4.0), 128)


# --- decay profiles --------------------------------------------------------------------

def test_decay_profile_zero():
    prof = bel.cgo_decay_profile(bel.BeltramiCoefficient.zero(G), [4, 8])
    assert [d for _, d in prof.rows] == [0.0, 0.0]
    assert not np.isfinite(prof.a) and prof.preferred_model == "none"


def test_decay_profile_records_failures(mu05):
    prof = bel.cgo_decay_profile(mu05, [4, 8], cfg=bel.SolverConfig(n_max=3))
    assert len(prof.errors) == 2 and all(np.isnan(d) for _, d in prof.rows)


@pytest.mark.slow
@pytest.mark.xfail(reason="at desk scale both the Holder and Dini deviations prefer the same model", strict=False)
def test_dual_fit_separates_holder_from_dini():
    out = {}
    for name, spec in (("dini", None), ("holder", ModulusSpec("holder", 0.5))):
        rows = []
        for k in 2.0 ** np.arange(2, 8):
            g = GridSpec(512 if k <= 64 else 1024, 4.0)
            rows.append((k, bel.solve_linear_cgo(make_dini_mu(2.0, 0.3, grid=g, profile_spec=spec), k).sup_deviation))
        kk, dd = np.array(rows).T
        a, _, th = __import__("calderon_dini.modulus", fromlist=["x"]).fit_theta_exponent(
            ThetaWeight(ModulusSpec("log-power", 1.2)), kk, dd)
        s, i = np.polyfit(np.log(kk), np.log(dd), 1)
        pw = np.sqrt(np.mean((np.log(dd) - s * np.log(kk) - i) ** 2))
        out[name] = "power-law" if pw < th else "double-log"
    assert out == {"holder": "power-law", "dini": "double-log"}


# --- regularity and recovery -----------------------------------------------------------

def test_identity_jacobian():
    ph = bel.solve_nonlinear_cgo(bel.BeltramiCoefficient.zero(G), 1.0)
    _, df, dbf = ph.derivatives()
    jac = bel.jacobian(df, dbf)
    c = G.N // 2
    assert G.z[c, c] == 0
    assert jac[c, c] == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(jac, np.exp(-2 * G.z.imag), rtol=1e-12)


def test_regularity_check(phase4):
    norm, jac = bel.cgo_regularity_check(phase4, ModulusSpec("integrated-log-power", 2.0))
    assert np.isfinite(norm) and norm > 0
    assert jac > 0


def test_recover_identity():
    # spectral derivatives of the windowed field; the window edge limits accuracy
    g = GridSpec(512, 4.0)
    mu, sup = bel.recover_mu(Field(g, np.exp(1j * g.z)), 0.1)
    assert mu.sup() < 1e-6


def test_recover_floor_above_everything(phase4):
    mu, sup = bel.recover_mu(phase4, 1e9)
    assert mu.sup() == 0 and sup.all()
    with pytest.raises(DomainError):
        bel.recover_mu(phase4, 0.0)


def test_recover_roundtrip(phase4, mu03):
    mu, sup = bel.recover_mu(phase4, 0.1)
    assert np.max(np.abs(mu.samples - mu03.mu.samples)[~sup]) <= 1e-3


def test_cell_doubling_convergence():
    """Same spacing, growing cell: the periodized solution converges like (R/L)^4."""
    devs = []
    for N, L in ((128, 2.0), (256, 4.0), (512, 8.0)):
        g = GridSpec(N, L)
        sol = bel.solve_linear_cgo(make_dini_mu(2.0, 0.3, grid=g), 4.0)
        c = N // 2
        devs.append(sol.psi.samples[c - 16:c + 17, c - 16:c + 17] - g.z[c - 16:c + 17, c - 16:c + 17])
    e1 = np.max(np.abs(devs[0] - devs[1]))
    e2 = np.max(np.abs(devs[1] - devs[2]))
    assert e2 < 2e-5 and e1 / e2 > 8
