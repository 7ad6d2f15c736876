import numpy as np
import pytest

from gridcsma import griddata as gd
from gridcsma.wavelets import analyze, build_wavelet_basis


class ZeroNoise:
    def standard_normal(self, size=None):
        return np.zeros(size if size is not None else ())


def test_constant_trend():
    m = gd.HarmonicModel(2.5)
    assert np.all(gd.deterministic_component(m, np.arange(500)) == 2.5)


def test_quarter_period_sine():
    m = gd.HarmonicModel(1.0, ((1, 1.0, 0.0),))
    assert gd.deterministic_component(m, 72) == pytest.approx(2.0, abs=1e-12)


def test_harmonic_index_bound():
    with pytest.raises(ValueError):
        gd.HarmonicModel(0.0, ((145, 1.0, 0.0),))
    with pytest.raises(ValueError):
        gd.HarmonicModel(0.0, (), period=0)


def test_ar_step_examples():
    rng = np.random.default_rng(0)
    white = gd.ArProcess.constant(0.0)
    draws = np.array([gd.step_stochastic(white, 50.0, t, rng) for t in range(20000)])
    assert abs(draws.mean()) < 0.05 and abs(draws.var() - 1.0) < 0.05
    proc = gd.ArProcess.constant(0.8)
    assert gd.step_stochastic(proc, 2.0, 3, ZeroNoise()) == pytest.approx(1.6)
    with pytest.raises(ValueError):
        gd.ArProcess.constant(1.0)


@pytest.mark.parametrize("phi", [0.0, 0.5, 0.9])
def test_ar_stationary_variance(phi):
    proc = gd.ArProcess.constant(phi)
    x = gd._ar_paths(proc, 1, 0, 100_000, 500, np.random.default_rng(1))[0]
    assert x.var() == pytest.approx(1 / (1 + phi), rel=0.05)


def test_two_node_correlation_formula():
    d = np.array([[0.0, 20.0], [20.0, 0.0]])
    lay = gd.NodeLayout(2, np.arange(2), d, 20.0)
    assert lay.correlation()[0, 1] == pytest.approx(np.exp(-1), abs=1e-12)


def test_layout_invariants():
    lay = gd.make_layout(64, seed=3)
    d = lay.distances
    assert np.array_equal(d, d.T) and np.all(np.diag(d) == 0)
    off = d[~np.eye(64, dtype=bool)]
    assert np.all((off > 0) & (off <= 1.0))
    assert len(lay.generator_nodes) == 32


def test_sqrt_correlation_reproduces_matrix():
    lay = gd.make_layout(16, seed=0, geometry="disc")
    c = lay.correlation()
    r = gd.sqrt_correlation(c)
    assert np.allclose(r, r.T) and np.allclose(r @ r, c, atol=1e-6)


def _plain_scenario(n, generators=True, seed=0, phi=0.0):
    lay = gd.make_layout(n, seed=seed, generator_fraction=0.5 if generators else 0.0)
    zero = gd.HarmonicModel()
    ar = gd.ArProcess.constant(phi)
    return gd.GridScenario(lay, zero, ar, zero, ar, seed, start=0)


def test_iid_field_without_trends_or_generators():
    z = gd.generate_field(_plain_scenario(32, generators=False), 2000)
    assert abs(z.mean()) < 0.02 and abs(z.var() - 1) < 0.03
    c = np.corrcoef(z)
    assert np.abs(c[~np.eye(32, dtype=bool)]).max() < 0.1


def test_generation_innovation_correlation():
    lay = gd.make_layout(6, seed=2)
    lay = gd.NodeLayout(6, np.arange(6), lay.distances * 30.0, 20.0)   # distances spread over (0, 30]
    c = lay.correlation()
    x = gd._ar_paths(gd.ArProcess.constant(0.0), 6, 0, 20000, 0, np.random.default_rng(3),
                     mix=gd.sqrt_correlation(c))
    assert np.abs(np.corrcoef(x) - c).max() <= 0.05


def test_reproducible():
    sc = gd.default_scenario(16, seed=4)
    assert np.array_equal(gd.generate_field(sc, 64), gd.generate_field(sc, 64))
    assert not np.array_equal(gd.generate_field(sc, 64), gd.generate_field(gd.with_seed(sc, 5), 64))


def test_n_t_must_be_positive():
    with pytest.raises(ValueError):
        gd.generate_field(gd.default_scenario(4), 0)


@pytest.mark.parametrize("n_s,n_t", [(64, 64), (128, 128), (128, 256)])
def test_default_fields_are_compressible(n_s, n_t):
    z = gd.generate_field(gd.default_scenario(n_s, seed=1), n_t)
    a = analyze(z, build_wavelet_basis(n_s), build_wavelet_basis(n_t))
    e = np.sort(a.ravel() ** 2)[::-1]
    assert e[: e.size // 10].sum() >= 0.8 * e.sum()


def test_default_scenario_rejects_unknown_key():
    with pytest.raises(ValueError):
        gd.default_scenario(8, bogus=1)


def test_preset_from_section():
    over = gd.preset_from_section({"amplitude": "2", "load_trend": "1.0; 1 0.5 0.0; 3 0.1 0.2"})
    assert over["amplitude"] == 2.0
    assert over["load_trend"] == (1.0, ((1, 0.5, 0.0), (3, 0.1, 0.2)))
    with pytest.raises(ValueError):
        gd.preset_from_section({"nope": "1"})


def test_fit_constant_series():
    m = gd.fit_harmonics(np.full(600, 5.0))
    assert m.chi_0 == 5.0 and m.m_h == 0


def test_fit_single_sine():
    t = np.arange(288 * 4)
    x = 2 * np.sin(2 * np.pi * t / 288) + 0.01 * np.random.default_rng(0).standard_normal(len(t))
    m = gd.fit_harmonics(x)
    assert m.harmonics[0][0] == 1
    assert m.harmonics[0][1] == pytest.approx(2.0, rel=0.05)
    assert m.m_h <= 3


def _ols_bic(x, ks, period=288):
    t = np.arange(len(x))
    cols = [np.ones(len(x))]
    for k in ks:
        cols += [np.sin(2 * np.pi * k * t / period), np.cos(2 * np.pi * k * t / period)]
    d = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(d, x, rcond=None)
    rss = ((x - d @ coef) ** 2).sum()
    return len(x) * np.log(rss / len(x)) + d.shape[1] * np.log(len(x))


def test_fit_round_trip_and_bic_minimal():
    truth = gd.HarmonicModel(1.0, ((1, 1.5, -0.5), (3, 0.4, 0.3)))
    t = np.arange(288 * 6)
    noise = 0.2 * gd._ar_paths(gd.ArProcess.constant(0.3), 1, 0, len(t), 100, np.random.default_rng(2))[0]
    x = gd.deterministic_component(truth, t) + noise
    m = gd.fit_harmonics(x, max_harmonics=10)
    assert {1, 3} <= {k for k, _, _ in m.harmonics}
    resid = x - gd.deterministic_component(m, t)
    assert resid.var() <= noise.var()
    assert gd.bic(x, m) == pytest.approx(_ols_bic(x, [k for k, _, _ in m.harmonics]))
    assert gd.bic(x, m) <= _ols_bic(x, range(1, 11)) + 1e-9


def test_fit_needs_two_periods():
    with pytest.raises(ValueError):
        gd.fit_harmonics(np.zeros(100))


def test_fit_ar1_constant_phi():
    x = gd._ar_paths(gd.ArProcess.constant(0.8), 1, 0, 288 * 100, 288, np.random.default_rng(7))[0]
    est = gd.fit_ar1(x)
    # each time-of-day slot sees 100 pairs, so single-slot estimates scatter by about 0.06
    assert abs(est.phi.mean() - 0.8) <= 0.05
    assert np.mean(np.abs(est.phi - 0.8) <= 0.15) >= 0.95


def test_fit_ar1_white_noise():
    x = np.random.default_rng(8).standard_normal(288 * 100)
    assert abs(gd.fit_ar1(x).phi.mean()) <= 0.05


def test_fit_ar1_alternating_is_clamped():
    x = np.tile([1.0, -1.0], 288 * 2)
    assert np.allclose(gd.fit_ar1(x).phi, -0.999)


def test_fit_ar1_insufficient_data():
    with pytest.raises(ValueError):
        gd.fit_ar1(np.zeros(300))
