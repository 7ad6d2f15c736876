"""Empirical measurement-count thresholds for Kronecker CS reconstruction."""
from dataclasses import dataclass, field
from math import isqrt

import numpy as np

from . import cs
from .griddata import generate_field, with_seed
from .wavelets import build_wavelet_basis

SPATIAL_1D = "spatial_1d"
TEMPORAL_1D = "temporal_1d"
KRON_2D = "kron_2d"
MODES = (SPATIAL_1D, TEMPORAL_1D, KRON_2D)


class UnreachableTarget(RuntimeError):
    def __init__(self, msg, curve):
        super().__init__(msg)
        self.curve = curve


class InfeasibleSplit(ValueError):
    pass


@dataclass
class CalibrationConfig:
    n_s: int
    n_t: int
    target_mse: float = 0.05
    target_success_prob: float = 0.95
    trials: int = 200
    sweep: list | None = None        # candidate M for Kron2D; default every n_S*n_T/256
    seed: int = 0
    kind: str = cs.ROW_SUBSAMPLING
    solver: cs.SolverConfig = field(default_factory=cs.SolverConfig)

    def __post_init__(self):
        if self.target_mse <= 0:
            raise ValueError("target_mse must be positive")
        if not 0 <= self.target_success_prob <= 1:
            raise ValueError("target_success_prob must lie in [0, 1]")
        if self.sweep is not None and np.any(np.diff(self.sweep) <= 0):
            raise ValueError("sweep must be strictly increasing")

    def kron_sweep(self):
        if self.sweep is not None:
            return list(self.sweep)
        n = self.n_s * self.n_t
        step = max(1, n // 256)
        return list(range(step, n + 1, step))


@dataclass
class CalibrationResult:
    m_s_thresh: int
    m_t_thresh: int
    m_thresh: int
    m_s: int
    m_t: int
    ratio: float
    success_curves: dict


class ScenarioSource:
    """Independent field realizations of one scenario; trial i uses seed (seed, i)."""

    def __init__(self, scenario, n_t, seed=0):
        self.scenario = scenario
        self.n_t = n_t
        self.seed = seed

    def __call__(self, trial):
        sub = int(np.random.SeedSequence([self.seed, trial]).generate_state(1)[0])
        return generate_field(with_seed(self.scenario, sub), self.n_t)


def _trial_seed(seed, trial):
    return int(np.random.SeedSequence([seed, trial, 7]).generate_state(1)[0])


def trial_outcome(mode, m_s, m_t, cfg, z, trial):
    """True when the reconstruction of field z from sampled values meets the MSE target."""
    n_s, n_t = z.shape
    if mode == SPATIAL_1D:
        m_t = n_t
        psi_t = build_wavelet_basis(n_t, "identity")
        psi_s = build_wavelet_basis(n_s)
    elif mode == TEMPORAL_1D:
        m_s = n_s
        psi_s = build_wavelet_basis(n_s, "identity")
        psi_t = build_wavelet_basis(n_t)
    elif mode == KRON_2D:
        psi_s, psi_t = build_wavelet_basis(n_s), build_wavelet_basis(n_t)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    plan = cs.make_measurement_plan(n_s, n_t, m_s, m_t, cfg.kind, _trial_seed(cfg.seed, trial))
    z_star, _, _ = cs.reconstruct(cs.observe(z, plan), plan, psi_s, psi_t, cfg.solver)
    return cs.mse(z, z_star) <= cfg.target_mse


def success_probability(mode, m_s, m_t, cfg, data_source, stop_when_decided=False):
    """Fraction of trials whose reconstruction meets target_mse.

    With stop_when_decided the loop ends as soon as the comparison against
    target_success_prob can no longer change; the returned value is then a bound
    that still lands on the correct side of the target.
    """
    if cfg.trials <= 0:
        raise ValueError("trials must be positive")
    if m_s < 1 or m_t < 1:
        raise ValueError("m_S and m_T must be at least 1")
    need = cfg.target_success_prob * cfg.trials
    wins = 0
    for i in range(cfg.trials):
        if m_s >= cfg.n_s and m_t >= cfg.n_t:
            wins += 1
        else:
            wins += trial_outcome(mode, m_s, m_t, cfg, data_source(i), i)
        if stop_when_decided:
            left = cfg.trials - i - 1
            if wins >= need or wins + left < need:
                # lower bound if already passing, upper bound if already failing
                return wins / cfg.trials if wins >= need else (wins + left) / cfg.trials
    return wins / cfg.trials


def find_threshold(mode, cfg, data_source, sweep=None, to_pair=None, stop_when_decided=False,
                   estimator=None):
    """Smallest M in the sweep whose success probability reaches the target, by bisection.

    `to_pair` maps M to (m_S, m_T); the default follows the mode (1D modes count
    M_S = m_S n_T and M_T = n_S m_T). `estimator(m_s, m_t)` replaces the Monte Carlo
    success estimate when given. Returns (M, curve) with curve a list of (M, p).
    """
    sweep = list(sweep if sweep is not None else default_sweep(mode, cfg))
    to_pair = to_pair or (lambda m: mode_pair(mode, m, cfg))
    curve = {}

    def passes(k):
        m = sweep[k]
        if m not in curve:
            if estimator is not None:
                curve[m] = float(estimator(*to_pair(m)))
            else:
                curve[m] = success_probability(mode, *to_pair(m), cfg, data_source, stop_when_decided)
        return curve[m] >= cfg.target_success_prob

    def log():
        return sorted(curve.items())

    if passes(0):
        return sweep[0], log()
    if not passes(len(sweep) - 1):
        raise UnreachableTarget(f"{mode}: target {cfg.target_success_prob} not reached within sweep", log())
    lo, hi = 0, len(sweep) - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if passes(mid):
            hi = mid
        else:
            lo = mid
    return sweep[hi], log()


def default_sweep(mode, cfg):
    if mode == SPATIAL_1D:
        return [m * cfg.n_t for m in range(1, cfg.n_s + 1)]
    if mode == TEMPORAL_1D:
        return [cfg.n_s * m for m in range(1, cfg.n_t + 1)]
    return cfg.kron_sweep()


def mode_pair(mode, m, cfg):
    if mode == SPATIAL_1D:
        return m // cfg.n_t, cfg.n_t
    if mode == TEMPORAL_1D:
        return cfg.n_s, m // cfg.n_s
    s = isqrt(m)
    return s, -(-m // s)


def split_m(n_s, n_t, m_s_thresh, m_t_thresh, m_thresh):
    """Smallest (m_S, m_T) with m_S m_T >= m_thresh and m_S/m_T closest to the target ratio.

    Target ratio r = (n_S/n_T)(M_S,thresh/M_T,thresh). For each m_S the smallest
    admissible m_T = ceil(m_thresh/m_S) is taken; among those pairs the one with
    the least |log(m_S/m_T) - log r| wins, then the smaller product, then smaller m_S.
    """
    if min(n_s, n_t, m_s_thresh, m_t_thresh, m_thresh) <= 0:
        raise ValueError("all inputs must be positive")
    if m_thresh > n_s * n_t:
        raise InfeasibleSplit(f"m_thresh {m_thresh} exceeds n_S n_T = {n_s * n_t}")
    r = (n_s / n_t) * (m_s_thresh / m_t_thresh)
    best = None
    for ms in range(1, n_s + 1):
        mt = -(-m_thresh // ms)
        if mt > n_t:
            continue
        key = (round(abs(np.log(ms / mt) - np.log(r)), 12), ms * mt, ms)
        if best is None or key < best[0]:
            best = (key, (ms, mt))
    if best is None:
        raise InfeasibleSplit("no admissible pair within (n_S, n_T)")
    return best[1]


def target_ratio(n_s, n_t, m_s_thresh, m_t_thresh):
    return (n_s / n_t) * (m_s_thresh / m_t_thresh)


def calibrate(cfg, data_source, stop_when_decided=True):
    """Spatial and temporal thresholds, then the Kron2D threshold along the split ratio."""
    ms_thr, c_s = find_threshold(SPATIAL_1D, cfg, data_source, stop_when_decided=stop_when_decided)
    mt_thr, c_t = find_threshold(TEMPORAL_1D, cfg, data_source, stop_when_decided=stop_when_decided)

    def pair(m):
        return split_m(cfg.n_s, cfg.n_t, ms_thr, mt_thr, m)

    m_thr, c_k = find_threshold(KRON_2D, cfg, data_source, to_pair=pair, stop_when_decided=stop_when_decided)
    m_s, m_t = pair(m_thr)
    return CalibrationResult(ms_thr, mt_thr, m_thr, m_s, m_t,
                             target_ratio(cfg.n_s, cfg.n_t, ms_thr, mt_thr),
                             {SPATIAL_1D: c_s, TEMPORAL_1D: c_t, KRON_2D: c_k})
