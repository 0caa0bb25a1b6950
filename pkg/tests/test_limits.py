import math

import numpy as np
import pytest
from scipy import integrate

from diffgof.config import build_model
from diffgof.errors import UnsupportedRegimeError, ValidationError
from diffgof.harness import ks_distance
from diffgof.limits import (LawSpec, ParamGrid, SimpleGrid, _param_kernels, default_param_grid,
                            draw_law, param_limit_field, parse_law_id, sample_param_limit,
                            sample_simple_limit, sample_w_functional, simple_limit_field,
                            sup_abs_w_cdf)
from diffgof.model import stationary_moments, unit_cdf, unit_pdf
from diffgof.simulate import RngStream, simulate_ensemble
from diffgof.statistics import simple_density_stat


def kernels(gamma, grid=None):
    g = grid or default_param_grid(gamma)
    return _param_kernels(float(gamma), g.L, g.dz, g.m_y)


def batch_fields(gamma, n, seed, chunk=10_000, grid=None):
    """Yield LimitFields for n draws in batches; increments from stream (seed, i)."""
    k = kernels(gamma, grid)
    for s in range(0, n, chunk):
        gens = [RngStream(seed, i).generator() for i in range(s, min(s + chunk, n))]
        dW = np.stack([gen.standard_normal(k.n_cells) for gen in gens], axis=1)
        yield param_limit_field(gamma, increments=dW * math.sqrt(k.cell_width), grid=grid)


# --- law ids ------------------------------------------------------------------

def test_law_id_roundtrip():
    for law in ("Delta:gamma=1", "delta_sup:gamma=0", "Delta_sup:gamma=2.5", "int_w2",
                "sup_abs_w", "delta_S0:abc123"):
        assert parse_law_id(law).law_id == law
    assert LawSpec("delta", gamma=3.0).law_id == "delta:gamma=3"


@pytest.mark.parametrize("bad", ["Delta", "Delta:beta=1", "Delta:gamma=x", "Delta:gamma=-1",
                                 "int_w2:gamma=1", "delta_S0", "bogus"])
def test_bad_law_ids(bad):
    with pytest.raises(ValidationError):
        parse_law_id(bad)


def test_unsupported_law():
    with pytest.raises(UnsupportedRegimeError):
        parse_law_id("Delta:gamma=0.5")
    with pytest.raises(UnsupportedRegimeError):
        param_limit_field(0.5)


# --- composite fields -------------------------------------------------------------

@pytest.mark.parametrize("gamma", [0.0, 0.3, 1.0, 3.0])
def test_zero_increments_give_zero(gamma):
    k = kernels(gamma)
    fld = param_limit_field(gamma, increments=np.zeros(k.n_cells))
    for arr in (fld.phi, fld.phi_tilde, fld.pi, fld.psi, fld.eta0, fld.zeta0):
        assert np.all(arr == 0)


def test_grid_has_no_midpoint_at_zero():
    for g in (0.75, 1.0, 2.0):
        k = kernels(g)
        assert k.n_cells % 2 == 0
        assert np.all(np.isfinite(k.pi_w))


@pytest.mark.parametrize("gamma", [0.0, 1.0, 2.0])
def test_fields_match_direct_sums_on_shared_increments(gamma):
    grid = ParamGrid(default_param_grid(gamma).L, default_param_grid(gamma).L / 40, 25)
    k = kernels(gamma, grid)
    dW = np.random.default_rng(1).standard_normal(k.n_cells) * math.sqrt(k.cell_width)
    fld = param_limit_field(gamma, increments=dW, grid=grid)
    z = 0.5 * (k.edges[:-1] + k.edges[1:])
    F0 = lambda v: float(unit_cdf(gamma, v))  # noqa: E731
    f0 = lambda v: float(unit_pdf(gamma, v))  # noqa: E731
    mom = stationary_moments(gamma)
    psi = sum(np.sign(zi) * abs(zi) ** gamma * math.sqrt(f0(zi)) * w for zi, w in zip(z, dW))
    pi = sum(abs(zi) ** (gamma - 1) * math.sqrt(f0(zi)) * w for zi, w in zip(z, dW)) if gamma >= 1 else 0.0
    assert fld.psi == pytest.approx(psi, rel=1e-10)
    assert fld.pi == pytest.approx(pi, rel=1e-10)
    for j, y in enumerate(fld.y_grid):
        phi = sum(2 * (F0(zi) * F0(y) - F0(min(zi, y))) / math.sqrt(f0(zi)) * w for zi, w in zip(z, dW))
        phit = sum(2 * (F0(zi) - (zi > y)) / math.sqrt(f0(zi)) * w for zi, w in zip(z, dW))
        assert fld.phi[j] == pytest.approx(phi, rel=1e-9, abs=1e-12)
        assert fld.phi_tilde[j] == pytest.approx(phit, rel=1e-9, abs=1e-12)
        bt = psi / ((gamma + 1) * mom.b)
        at = pi / (gamma * mom.a) if gamma >= 1 else 0.0
        eta = phi + at * f0(y) + y * bt * f0(y)
        zeta = (phit - 2 * np.sign(y) * abs(y) ** gamma * at + (1 - 2 * abs(y) ** (gamma + 1)) * bt) * f0(y)
        assert fld.eta0[j] == pytest.approx(eta, rel=1e-9, abs=1e-12)
        assert fld.zeta0[j] == pytest.approx(zeta, rel=1e-9, abs=1e-12)


def test_low_gamma_ignores_pi_override():
    k = kernels(0.0)
    dW = np.random.default_rng(2).standard_normal(k.n_cells) * math.sqrt(k.cell_width)
    base = param_limit_field(0.0, increments=dW)
    forced = param_limit_field(0.0, increments=dW, pi_override=123.0)
    np.testing.assert_array_equal(base.eta0, forced.eta0)
    np.testing.assert_array_equal(base.zeta0, forced.zeta0)
    assert np.all(forced.pi == 0)
    high = kernels(1.0)
    dW = np.random.default_rng(2).standard_normal(high.n_cells) * math.sqrt(high.cell_width)
    assert not np.array_equal(param_limit_field(1.0, increments=dW).eta0,
                              param_limit_field(1.0, increments=dW, pi_override=5.0).eta0)


def test_batch_and_single_agree():
    k = kernels(1.0)
    dW = np.random.default_rng(3).standard_normal((k.n_cells, 4)) * math.sqrt(k.cell_width)
    batch = param_limit_field(1.0, increments=dW)
    for i in range(4):
        single = param_limit_field(1.0, increments=dW[:, i])
        np.testing.assert_allclose(batch.eta0[:, i], single.eta0, rtol=1e-12, atol=1e-15)


def test_increment_length_checked():
    with pytest.raises(ValidationError):
        param_limit_field(1.0, increments=np.zeros(7))


@pytest.mark.slow
@pytest.mark.parametrize("gamma", [1.0, 2.0])
def test_isometries(gamma):
    n = 100_000
    psi, pi, phi = [], [], []
    k = kernels(gamma)
    cols = [k.y.size // 8, k.y.size // 2, 7 * k.y.size // 8]
    for fld in batch_fields(gamma, n, seed=17):
        psi.append(fld.psi)
        pi.append(fld.pi)
        phi.append(fld.phi[cols])
    psi, pi, phi = np.concatenate(psi), np.concatenate(pi), np.concatenate(phi, axis=1)
    mom = stationary_moments(gamma)

    def within(sample, target):
        se = np.std(sample, ddof=1) / math.sqrt(sample.size)
        return abs(np.mean(sample) - target) < 3 * se

    assert within(psi ** 2, mom.b)
    assert within(pi * psi, 0.0)
    assert within(pi ** 2, mom.a)
    f0 = lambda v: float(unit_pdf(gamma, v))  # noqa: E731
    F0 = lambda v: float(unit_cdf(gamma, v))  # noqa: E731
    L = float(k.edges[-1])
    for j, col in enumerate(cols):
        y = float(k.y[col])
        g = lambda z: 4 * (F0(z) * F0(y) - F0(min(z, y))) ** 2 / f0(z)  # noqa: E731
        ref = integrate.quad(g, -L, y)[0] + integrate.quad(g, y, L)[0]
        assert within(phi[j] ** 2, ref), (y, np.mean(phi[j] ** 2), ref)


@pytest.mark.slow
def test_grid_convergence_with_coupled_increments():
    # fine grid: double L, halve dz; the coarse increments are sums of fine pairs inside [-L, L]
    coarse = default_param_grid(1.0)
    fine = ParamGrid(2 * coarse.L, coarse.dz / 2, coarse.m_y)
    kc, kf = kernels(1.0, coarse), kernels(1.0, fine)
    offset = (kf.n_cells - 2 * kc.n_cells) // 2
    np.testing.assert_allclose(kf.edges[offset::2][:kc.n_cells + 1], kc.edges, atol=1e-12)
    n, vc, vf = 10_000, [], []
    for s in range(0, n, 2500):
        gens = [RngStream(23, i).generator() for i in range(s, s + 2500)]
        dWf = np.stack([g.standard_normal(kf.n_cells) for g in gens], axis=1) * math.sqrt(kf.cell_width)
        inner = dWf[offset:offset + 2 * kc.n_cells]
        dWc = inner[0::2] + inner[1::2]
        for grid, dW, out in ((coarse, dWc, vc), (fine, dWf, vf)):
            fld = param_limit_field(1.0, increments=dW, grid=grid)
            tt = np.r_[0.0, fld.t_grid, 1.0]
            vv = np.vstack([np.zeros((1, dW.shape[1])), fld.eta0, np.zeros((1, dW.shape[1]))])
            out.append(np.trapezoid(vv ** 2, tt, axis=0))
    qc, qf = np.quantile(np.concatenate(vc), 0.9), np.quantile(np.concatenate(vf), 0.9)
    assert abs(qc - qf) < 0.02 * qf


def test_sample_param_limit_metadata():
    s = sample_param_limit(1.0, "ParamDensity", "KS", rng=RngStream(0))
    assert s.law_id == "delta_sup:gamma=1" and s.value >= 0
    assert set(s.grid) == {"L", "dz", "m_y"}


# --- simple-model field ----------------------------------------------------------

def test_simple_zero_increments():
    model = build_model("simple:ou")
    x, t, zeta = simple_limit_field(model, increments=np.zeros(400))
    assert np.all(zeta == 0) and x.size == t.size == 400


@pytest.mark.slow
def test_simple_field_isometry_at_mode():
    model = build_model("simple:ou")
    grid = SimpleGrid(1e-9, 400, 401)
    x, _, _ = simple_limit_field(model, increments=np.zeros(400), grid=grid)
    j = 200
    assert abs(x[j]) < 1e-8
    lo, hi = model.quantile(np.array([1e-9, 1 - 1e-9]))
    vals = []
    for s in range(0, 100_000, 10_000):
        dW = np.random.default_rng([29, s]).standard_normal((400, 10_000))
        dW *= math.sqrt((hi - lo) / 400)
        vals.append(simple_limit_field(model, increments=dW, grid=grid)[2][j])
    sq = np.concatenate(vals) ** 2
    f = lambda y: float(model.pdf(y))  # noqa: E731
    F = lambda y: float(model.cdf(y))  # noqa: E731
    # stay inside the sampler's truncation: far out F^2/f is a ratio of two underflowing numbers
    ref = 4 * f(0.0) ** 2 * (integrate.quad(lambda y: F(y) ** 2 / f(y), lo, 0)[0]
                             + integrate.quad(lambda y: (1 - F(y)) ** 2 / f(y), 0, hi)[0])
    assert abs(sq.mean() - ref) < 3 * sq.std(ddof=1) / math.sqrt(sq.size)


def test_sample_simple_limit_law_id():
    model = build_model("simple:ou")
    s = sample_simple_limit(model, "KS", rng=RngStream(1))
    assert s.law_id == f"delta_S0_sup:{model.key}"


@pytest.mark.slow
def test_simple_density_limit_matches_ensemble():
    model = build_model("simple:ou")
    paths = simulate_ensemble(model, 500.0, 0.01, [RngStream(31, r) for r in range(300)])
    finite = [simple_density_stat(p, model).value for p in paths]
    limit = draw_law(f"delta_S0:{model.key}", 10_000, 32, model=model)
    assert ks_distance(finite, limit) <= 0.12


# --- Wiener functionals ------------------------------------------------------------

@pytest.mark.slow
def test_int_w2_moments():
    v = draw_law("int_w2", 100_000, 41)
    assert 0.49 <= v.mean() <= 0.51
    assert 0.31 <= v.var(ddof=1) <= 0.35


def test_sup_abs_matches_series():
    v = draw_law("sup_abs_w", 20_000, 43)
    for x in (0.8, 1.2, 1.6, 2.2414):
        assert abs(np.mean(v <= x) - float(sup_abs_w_cdf(x))) < 0.01


def test_sup_series_known_quantile():
    # P(sup|w| <= 2.2414) = 0.95 is the classical 5% point
    assert float(sup_abs_w_cdf(2.2414)) == pytest.approx(0.95, abs=1e-4)
    assert float(sup_abs_w_cdf(0.0)) == 0.0 and float(sup_abs_w_cdf(10.0)) == pytest.approx(1.0)


def test_w_functional_errors_and_metadata():
    with pytest.raises(ValidationError):
        sample_w_functional("int_sq", n_steps=50)
    s = sample_w_functional("sup_abs", rng=RngStream(0))
    assert s.law_id == "sup_abs_w" and s.grid == {"n_steps": 1000, "bridge_sup": True}


def test_bridge_removes_grid_bias():
    gen = RngStream(44).generator()
    plain = [sample_w_functional("sup_abs", 100, gen, bridge=False).value for _ in range(4000)]
    bridged = [sample_w_functional("sup_abs", 100, gen, bridge=True).value for _ in range(4000)]
    exact = float(sup_abs_w_cdf(1.5))
    assert abs(np.mean(np.array(bridged) <= 1.5) - exact) < 0.02
    assert np.mean(np.array(plain) <= 1.5) > np.mean(np.array(bridged) <= 1.5)


# --- draw_law ----------------------------------------------------------------------

@pytest.mark.parametrize("law", ["Delta:gamma=1", "delta_sup:gamma=0", "int_w2", "sup_abs_w"])
def test_draw_law_stream_layout(law):
    a = draw_law(law, 9, 5)
    np.testing.assert_array_equal(a, draw_law(law, 9, 5))
    # batch shape changes the BLAS summation order, so only the last bits may move
    np.testing.assert_allclose(a, draw_law(law, 9, 5, chunk=4), rtol=1e-12)
    np.testing.assert_allclose(a[3:], draw_law(law, 6, 5, start=3), rtol=1e-12)
    assert not np.array_equal(a, draw_law(law, 9, 6))
    assert np.all(a >= 0)


def test_draw_law_matches_single_samplers():
    v = draw_law("Delta_sup:gamma=2", 2, 8)
    for i in range(2):
        assert sample_param_limit(2.0, "ParamEDF", "KS", rng=RngStream(8, i)).value == pytest.approx(v[i], rel=1e-12)
    w = draw_law("sup_abs_w", 2, 8)
    assert sample_w_functional("sup_abs", rng=RngStream(8, 1)).value == pytest.approx(w[1], rel=1e-12)


def test_draw_law_requires_matching_model():
    ou = build_model("simple:ou")
    with pytest.raises(ValidationError):
        draw_law(f"delta_S0:{ou.key}", 3, 0)
    with pytest.raises(ValidationError):
        draw_law(f"delta_S0:{ou.key}", 3, 0, model=build_model("simple:cubic"))
