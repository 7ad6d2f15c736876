"""MAC parameter search, baseline delays and channel planning."""
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .analytic import sufficiency_probability
from .macconfig import MacConfig

UNIFORM = "uniform"
FREE = "free"
FREE_K_TAU_LIMIT = 4

TDMA, TDMA_CS, CSMA, CSMA_CS = "TDMA", "TDMA_CS", "CSMA", "CSMA_CS"
SCHEMES = (TDMA, TDMA_CS, CSMA, CSMA_CS)


class Infeasible(RuntimeError):
    def __init__(self, msg, best_probability=0.0):
        super().__init__(msg)
        self.best_probability = best_probability


def default_p_s_grid(step=0.01):
    return np.round(np.arange(1, int(round(1 / step)) + 1) * step, 10)


@dataclass
class OptimizationSpec:
    n_s: int
    m_s: int
    p_suff: float = 0.9
    k_tau_max: int = 8
    bo_max: int = 6
    bo_min: int = 0
    p_s_grid: np.ndarray = field(default_factory=default_p_s_grid)
    bo_profile_mode: str = UNIFORM
    base: MacConfig = field(default_factory=MacConfig)
    max_delay: int | None = None   # only profiles at or below this delay are searched

    def __post_init__(self):
        self.p_s_grid = np.asarray(self.p_s_grid, dtype=float)
        if not 0 < self.p_suff <= 1:
            raise ValueError("p_suff must lie in (0, 1]")
        if self.k_tau_max < 1 or self.bo_max < self.bo_min or len(self.p_s_grid) == 0:
            raise ValueError("empty search grid")
        if not 1 <= self.m_s <= self.n_s:
            raise ValueError("need 1 <= m_S <= n_S")
        if self.bo_profile_mode not in (UNIFORM, FREE):
            raise ValueError(f"unknown profile mode {self.bo_profile_mode!r}")
        if self.bo_profile_mode == FREE and self.k_tau_max > FREE_K_TAU_LIMIT:
            raise ValueError(f"free BO profiles are limited to k_tau <= {FREE_K_TAU_LIMIT}")


@dataclass
class OptimizationResult:
    best_k_tau: int
    best_bo: tuple
    best_p_s: float
    delay_slots: int
    achieved_probability: float
    search_log: list = field(default_factory=list, repr=False)   # (k_tau, bo, p_s, prob, delay)
    config: MacConfig | None = None

    def row(self, scheme, n_s, m_s):
        return (scheme, n_s, m_s, self.best_k_tau, "-".join(map(str, self.best_bo)),
                f"{self.best_p_s:.2f}", self.delay_slots, f"{self.achieved_probability:.6f}")


def analytic_evaluator(n_s, m_s, cfg):
    return sufficiency_probability(n_s, m_s, cfg).prob_sufficient


def candidate_profiles(spec):
    """(delay, k_tau, bo) for every profile in the grid, in search order."""
    out = []
    bos = range(spec.bo_min, spec.bo_max + 1)
    for k in range(1, spec.k_tau_max + 1):
        profiles = ((b,) * k for b in bos) if spec.bo_profile_mode == UNIFORM else product(bos, repeat=k)
        for bo in profiles:
            delay = sum(spec.base.sf0 * 2 ** b for b in bo)
            if spec.max_delay is None or delay <= spec.max_delay:
                out.append((delay, k, tuple(bo)))
    out.sort()
    return out


def success_capacity(cfg):
    """Upper bound on deliveries in one RI: back-to-back successes in every superframe."""
    span = cfg.l_s + cfg.priority
    return sum(max(0, (s - span) // span + 1) for s in cfg.sf_lengths)


def best_p_s(spec, cfg, evaluator):
    """Inner step: the p_s grid point maximizing the sufficiency probability."""
    probs = np.array([evaluator(spec.n_s, spec.m_s, cfg.with_profile(cfg.bo, float(p))) for p in spec.p_s_grid])
    k = int(np.argmax(probs))
    return float(spec.p_s_grid[k]), float(probs[k]), probs


def optimize(spec: OptimizationSpec, evaluator=analytic_evaluator, exhaustive=False):
    """Minimum-delay (k_tau, BO profile, p_s) meeting Pr{K_succ >= m_S} >= p_suff.

    Profiles are visited in order of (delay, k_tau, BO profile), so the first feasible
    one is the optimum with the required tie-breaking. With exhaustive=True every
    profile is evaluated and logged anyway.
    """
    log = []
    best = None
    best_prob = 0.0
    for delay, k, bo in candidate_profiles(spec):
        if best is not None and not exhaustive:
            break
        cfg = spec.base.with_profile(bo, spec.base.p_s)
        if success_capacity(cfg) < spec.m_s:
            log.append((k, bo, float("nan"), 0.0, delay))
            continue
        p, prob, _ = best_p_s(spec, cfg, evaluator)
        log.append((k, bo, p, prob, delay))
        best_prob = max(best_prob, prob)
        if prob >= spec.p_suff and best is None:
            best = OptimizationResult(k, bo, p, delay, prob, config=cfg.with_profile(bo, p))
    if best is None:
        raise Infeasible(f"no configuration reaches {spec.p_suff} (best {best_prob:.4f})", best_prob)
    best.search_log = log
    return best


@dataclass
class BaselineDelay:
    scheme: str
    per_ri: float          # slots in each RI where the scheme is active
    amortized: float       # average slots per RI over n_T RIs
    result: OptimizationResult | None = None


def baseline_delay(scheme, n_s, m_s, m_t, n_t, spec: OptimizationSpec | None = None,
                   evaluator=analytic_evaluator):
    """Reporting delay of a scheme; CS variants are active only in m_T of n_T RIs."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if not (1 <= m_s <= n_s and 1 <= m_t <= n_t):
        raise ValueError("inconsistent (n_S, m_S, m_T, n_T)")
    base = spec.base if spec is not None else MacConfig()
    if scheme == TDMA:
        d = n_s * base.l_s
        return BaselineDelay(scheme, d, d)
    if scheme == TDMA_CS:
        d = m_s * base.l_s
        return BaselineDelay(scheme, d, d * m_t / n_t)
    target = n_s if scheme == CSMA else m_s
    if spec is None:
        spec = OptimizationSpec(n_s, target)
    else:
        spec = OptimizationSpec(n_s, target, spec.p_suff, spec.k_tau_max, spec.bo_max, spec.bo_min,
                                spec.p_s_grid, spec.bo_profile_mode, spec.base, spec.max_delay)
    res = optimize(spec, evaluator)
    frac = 1.0 if scheme == CSMA else m_t / n_t
    return BaselineDelay(scheme, res.delay_slots, res.delay_slots * frac, res)


@dataclass
class ChannelPlan:
    scheme: str
    n_nodes: int
    d_max: float
    group_size: int
    channels: float

    def row(self):
        return (self.scheme, self.n_nodes, self.d_max, self.group_size, f"{self.channels:.4f}")


def largest_group(feasible, n_max, n_min=1):
    """Largest n in [n_min, n_max] with feasible(n), assuming feasibility only gets
    harder as n grows: doubling from n_min, then bisection."""
    if not feasible(n_min):
        return None
    lo, step = n_min, 1
    while True:
        hi = min(lo + step, n_max)
        if hi == lo:
            return lo
        if not feasible(hi):
            break
        lo, step = hi, step * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def channel_plan(n_nodes, d_max, schemes=(TDMA, CSMA_CS), m_s_of=None, time_fraction=1.0,
                 spec: OptimizationSpec | None = None, evaluator=analytic_evaluator, n_max=512):
    """Per scheme: the largest group size meeting d_max, then the channel count.

    Channels are N / n_S, times time_fraction (m_T / n_T) for the CS schemes;
    fractional counts are kept. m_s_of maps a group size to its calibrated m_S.
    """
    base = spec.base if spec is not None else MacConfig()
    m_s_of = m_s_of or (lambda n: n)
    out = []
    for scheme in schemes:
        if scheme == TDMA:
            ok = lambda n: n * base.l_s <= d_max
        elif scheme == TDMA_CS:
            ok = lambda n: m_s_of(n) * base.l_s <= d_max
        elif scheme in (CSMA, CSMA_CS):
            def ok(n, scheme=scheme):
                m = n if scheme == CSMA else m_s_of(n)
                s = OptimizationSpec(n, m, max_delay=d_max, base=base) if spec is None else \
                    OptimizationSpec(n, m, spec.p_suff, spec.k_tau_max, spec.bo_max, spec.bo_min,
                                     spec.p_s_grid, spec.bo_profile_mode, base, d_max)
                try:
                    optimize(s, evaluator)
                    return True
                except Infeasible:
                    return False
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        n = largest_group(ok, n_max)
        if n is None:
            raise Infeasible(f"{scheme}: no group size meets d_max={d_max}")
        frac = time_fraction if scheme in (TDMA_CS, CSMA_CS) else 1.0
        out.append(ChannelPlan(scheme, n_nodes, d_max, n, n_nodes / n * frac))
    return out
