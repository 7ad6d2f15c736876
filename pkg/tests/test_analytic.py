from fractions import Fraction
from itertools import product
from math import comb, factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridcsma import analytic as an, macsim
from gridcsma.macconfig import MacConfig, uniform


def test_contender_pmf_examples():
    assert an.contender_count_pmf(10, 1.0, 10) == 1.0
    assert an.contender_count_pmf(10, 1.0, 9) == 0.0
    assert an.contender_count_pmf(2, 0.5, 1) == pytest.approx(0.5, abs=1e-15)
    exact = Fraction(comb(64, 16)) * Fraction(1, 4) ** 16 * Fraction(3, 4) ** 48
    assert an.contender_count_pmf(64, 0.25, 16) == pytest.approx(float(exact), rel=1e-12)
    assert an.contender_pmf(1024, 0.3).sum() == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        an.contender_count_pmf(4, 0.5, 5)


def test_single_contender_fixed_point():
    cfg = MacConfig()
    fp = an.solve_slot_fixed_point(1, cfg, sf_length=cfg.sf_length(0))
    assert fp.p_c == 0.0 and fp.lam == 0.0
    st_ = an.frame_stats(fp, cfg)
    assert st_.p_ccas == 0.0 and st_.p_coll == 0.0
    assert st_.p_succ == pytest.approx(1.0 - fp.p_d)


def test_fixed_point_consistency():
    cfg = MacConfig()
    for h in (2, 8, 32, 128):
        fp = an.solve_slot_fixed_point(h, cfg, sf_length=192)
        assert fp.p_c == pytest.approx(1 - (1 - fp.phi) ** (h - 1), abs=1e-15)
        assert 0 <= fp.phi <= 1 and 0 <= fp.lam <= 1
        assert fp.p_d == pytest.approx(min(1.0, 12 / 192))


def test_fixed_point_non_convergence_carries_iterate():
    with pytest.raises(an.FixedPointError) as exc:
        an.solve_slot_fixed_point(16, MacConfig(), max_iter=2)
    assert len(exc.value.last) == 3


def test_fixed_point_matches_simulator_h16():
    cfg = uniform(1, 4, p_s=1.0)
    ana = an.solve_slot_fixed_point(16, cfg, sf_length=192)
    sim = an.solve_slot_fixed_point(16, cfg, an.SIM_CALIBRATED, sf_length=192, reps=10_000, seed=1)
    assert abs(ana.phi - sim.phi) <= 0.05
    assert abs(ana.lam - sim.lam) <= 0.05


def test_empty_channel_frame_is_deterministic_path():
    cfg = MacConfig()
    fp = an.SlotFixedPoint(0.0, 0.0, 0.0, 0.0, 1)
    s = an.frame_stats(fp, cfg)
    assert s.p_succ == 1.0
    assert s.t_bar == pytest.approx(cfg.w0 / 2 + cfg.priority + cfg.l_s, abs=1e-12)


def test_full_deference():
    s = an.frame_stats(an.SlotFixedPoint(0.1, 0.5, 0.3, 1.0, 4), MacConfig())
    assert (s.p_succ, s.p_coll, s.p_ccas, s.p_d) == (0.0, 0.0, 0.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.integers(1, 64))
def test_outcomes_sum_to_one(phi, lam, p_d, h):
    fp = an.SlotFixedPoint(phi, lam, 1 - (1 - phi) ** (h - 1), p_d, h)
    s = an.frame_stats(fp, MacConfig())
    assert abs(s.p_succ + s.p_coll + s.p_ccas + s.p_d - 1) <= 1e-9
    assert s.t_bar > 0 and s.sigma2 >= 0


def test_pgf_moments_exact():
    # uniform on {0..4}: mean 2, E[X(X-1)] = 4
    d1, d2 = an.pgf_moments(np.full(5, 0.2))
    assert d1 == pytest.approx(2.0, abs=1e-14) and d2 == pytest.approx(4.0, abs=1e-14)


def test_frame_stats_moments_match_simulator_h16():
    cfg = uniform(1, 4, p_s=1.0)
    s = an.frame_stats(an.solve_slot_fixed_point(16, cfg, sf_length=192), cfg)
    emp = macsim.estimate_empirics(16, cfg, 10_000, seed=1)
    assert s.t_bar == pytest.approx(emp.t_bar, rel=0.05)
    assert s.sigma2 == pytest.approx(emp.sigma2, rel=0.05)


def test_frame_count_examples():
    cfg = MacConfig(nb=5, t_p=7, t_ack=1, l_ack=2)
    assert an.max_frames(60, cfg) == 10
    s = an.FrameStats(1.0, 0.0, 0.0, 0.0, t_bar=12.0, sigma2=0.0)
    pk = an.frame_count_pmf(s, 60, cfg)
    assert pk[5] == 1.0 and pk.sum() == 1.0
    s = an.FrameStats(0.5, 0.2, 0.2, 0.1, t_bar=9.0, sigma2=20.0)
    pk = an.frame_count_pmf(s, 60, cfg)
    assert len(pk) == 11 and pk.sum() == pytest.approx(1.0, abs=1e-12) and np.all(pk >= 0)
    with pytest.raises(ValueError):
        an.frame_count_pmf(s, 0, cfg)


def test_frame_count_matches_simulator_h16():
    cfg = uniform(1, 4, p_s=1.0)
    s = an.frame_stats(an.solve_slot_fixed_point(16, cfg, sf_length=192), cfg)
    pk = an.frame_count_pmf(s, 192, cfg)
    emp = macsim.estimate_empirics(16, cfg, 10_000, seed=2)
    hist = np.bincount(emp.frame_counts, minlength=len(pk)) / len(emp.frame_counts)
    n = max(len(pk), len(hist))
    tv = 0.5 * np.abs(np.pad(pk, (0, n - len(pk))) - np.pad(hist, (0, n - len(hist)))).sum()
    assert tv <= 0.1


def _enumerate_splits(stats, k_s):
    out = np.zeros(k_s + 1)
    ps = (stats.p_succ, stats.p_coll, stats.p_d, stats.p_ccas)
    for s, j, kd, l in product(range(k_s + 1), range(k_s + 1), (0, 1), range(k_s + 1)):
        if s + j + kd + l != k_s:
            continue
        coef = factorial(k_s) // (factorial(s) * factorial(j) * factorial(kd) * factorial(l))
        out[s] += coef * ps[0] ** s * ps[1] ** j * ps[2] ** kd * ps[3] ** l
    return out / out.sum()


def test_sf_success_examples():
    assert np.array_equal(an.sf_success_pmf(an.FrameStats(1.0, 0, 0, 0, 5.0, 1.0), 4), [0, 0, 0, 0, 1])
    pmf = an.sf_success_pmf(an.FrameStats(0.5, 0.3, 0.2, 0.0, 5.0, 1.0), 1)
    assert pmf == pytest.approx([0.5, 0.5], abs=1e-15)
    generic = an.FrameStats(0.4, 0.25, 0.2, 0.15, 5.0, 1.0)
    assert an.sf_success_pmf(generic, 3) == pytest.approx(_enumerate_splits(generic, 3), abs=1e-14)
    assert an.sf_success_pmf(generic, 0) == pytest.approx([1.0])


def test_kernel_rows_are_distributions():
    cfg = MacConfig()
    for kernel in ("chain", "frames"):
        for h in (0, 1, 5, 40):
            row = an.kernel_row(h, 96, cfg, kernel)
            assert len(row) <= h + 1 and row.sum() == pytest.approx(1.0, abs=1e-9) and np.all(row >= -1e-15)


def test_chain_kernel_close_to_simulator():
    cfg = MacConfig()
    for h, sf in ((8, 96), (32, 192)):
        row = an.kernel_row(h, sf, cfg)
        hist = macsim.sf_success_histogram(h, sf, cfg, 20_000, seed=5)
        mean = lambda p: np.dot(np.arange(len(p)), p)
        assert abs(mean(row) - mean(hist)) <= 0.1 * max(1.0, mean(hist))


def test_sufficiency_examples():
    assert an.sufficiency_probability(16, 1, uniform(3, 4, p_s=0.0)).prob_sufficient == 0.0
    one = an.sufficiency_probability(1, 1, uniform(8, 6, p_s=1.0)).prob_sufficient
    assert one == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        an.sufficiency_probability(4, 5, MacConfig())


def test_sweep_peak_at_bo4_k3():
    grid = np.round(np.arange(0.05, 1.0001, 0.01), 2)
    p, best, probs = an.max_over_p_s(64, 16, uniform(3, 4), grid)
    assert 0.3 <= p <= 0.5 and best >= 0.9
    assert probs[0] < best and probs[-1] < best


def test_report_marginals():
    rep = an.sufficiency_probability(12, 4, uniform(2, 3, p_s=0.5), with_marginals=True)
    assert len(rep.per_sf_success_distributions) == 2
    for d in rep.per_sf_success_distributions:
        assert d.sum() == pytest.approx(1.0, abs=1e-9)
    assert rep.per_h_terms.sum() == pytest.approx(1.0, abs=1e-12)
    assert rep.prob_sufficient == pytest.approx(np.dot(rep.per_h_terms, rep.conditional), abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 24), st.floats(0.05, 1.0), st.integers(1, 4), st.integers(1, 5))
def test_monotone_in_k_tau_and_m_s(n_s, p_s, bo, k):
    m_s = max(1, n_s // 3)
    base = uniform(k, bo, p_s=p_s)
    longer = uniform(k + 1, bo, p_s=p_s)
    p = an.sufficiency_probability(n_s, m_s, base).prob_sufficient
    assert an.sufficiency_probability(n_s, m_s, longer).prob_sufficient >= p - 1e-12
    if m_s < n_s:
        assert an.sufficiency_probability(n_s, m_s + 1, base).prob_sufficient <= p + 1e-12
