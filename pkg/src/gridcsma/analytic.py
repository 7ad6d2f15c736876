"""Reliability model for one reporting interval: Pr{K_succ >= m_S}.

Building blocks:
  * slot fixed point (phi, lambda, p_c, P_d) from a per-node renewal model
  * generic-frame outcome probabilities and moments from the frame PGF
  * frame-count distribution from a normal approximation of the frame-length sum
  * per-superframe success distribution (multinomial over outcomes)
  * dynamic programming over superframes and a binomial mixture over contenders

The per-superframe success kernel used by the DP can be the frame composition
above ("frames"), a count-resolved slot chain ("chain", the default), or a
simulator histogram ("empirical").
"""
from dataclasses import dataclass, field
from functools import lru_cache
from math import exp, lgamma, log, log1p

import numba as nb
import numpy as np
from scipy.optimize import root
from scipy.special import ndtr

from .macconfig import MacConfig

ANALYTIC = "analytic"
SIM_CALIBRATED = "sim"
KERNELS = ("chain", "frames", "empirical")


class FixedPointError(RuntimeError):
    def __init__(self, msg, last):
        super().__init__(msg)
        self.last = last


class ModelInconsistency(ValueError):
    pass


def contender_count_pmf(n_s, p_s, h):
    """Binomial(n_S, p_s) mass at h, evaluated in log space."""
    if not 0 <= h <= n_s:
        raise ValueError(f"h={h} outside [0, {n_s}]")
    if not 0.0 <= p_s <= 1.0:
        raise ValueError("p_s must lie in [0, 1]")
    if p_s == 0.0:
        return 1.0 if h == 0 else 0.0
    if p_s == 1.0:
        return 1.0 if h == n_s else 0.0
    lc = lgamma(n_s + 1) - lgamma(h + 1) - lgamma(n_s - h + 1)
    return exp(lc + h * log(p_s) + (n_s - h) * log1p(-p_s))


def contender_pmf(n_s, p_s):
    return np.array([contender_count_pmf(n_s, p_s, h) for h in range(n_s + 1)])


@dataclass(frozen=True)
class SlotFixedPoint:
    phi: float          # CCA attempts per slot per node
    lam: float          # probability an attempt finds the channel busy
    p_c: float          # 1 - (1 - phi)^(h - 1)
    p_d: float
    h: int
    lam_first: float | None = None   # part of lam caught at the first CCA
    iterations: int = 0

    def __post_init__(self):
        for name in ("phi", "lam", "p_c", "p_d"):
            v = getattr(self, name)
            if not -1e-12 <= v <= 1 + 1e-12:
                raise ModelInconsistency(f"{name}={v} outside [0, 1]")


def deference_probability(cfg, sf_length):
    return min(1.0, (cfg.l_s + cfg.priority) / sf_length)


def _renewal_update(phi, lam, lam1, h, cfg):
    """One pass of the per-node renewal map; returns (phi, lam, lam1)."""
    nbk = cfg.nb
    p_c = 1.0 - (1.0 - phi) ** (h - 1)
    tries = sum(lam ** j for j in range(nbk + 1))
    # slots spent by one attempt: backoff mean plus the CCAs actually performed
    cca_slots = (lam1 * 1.0 + (lam - lam1) * 2.0 + (1.0 - lam) * cfg.priority) if lam > 0 else float(cfg.priority)
    if cfg.priority == 1:
        cca_slots = 1.0
    backoff = sum(lam ** j * (cfg.window(j) / 2.0 + cca_slots) for j in range(nbk + 1))
    p_tx = 1.0 - lam ** (nbk + 1)
    tx = p_tx * ((1.0 - p_c) * cfg.l_s + p_c * (cfg.t_p + cfg.t_ack_timeout))
    episode = backoff + tx
    phi_new = tries / episode
    # channel occupancy by one other node: data slots plus ACK slots on success
    occ = p_tx * ((1.0 - p_c) * (cfg.t_p + cfg.l_ack) + p_c * cfg.t_p) / episode
    lam1_new = 1.0 - (1.0 - min(occ, 1.0)) ** (h - 1)
    # second CCA: a channel transmission starting next slot, or an ACK after the turnaround
    tau = p_tx / episode
    starts = 1.0 - (1.0 - tau) ** (h - 1)
    acks = (h - 1) * tau * (1.0 - tau) ** max(h - 2, 0) if cfg.t_ack > 0 else 0.0
    lam2 = min(1.0, (starts + acks) / max(1.0 - lam1_new, 1e-12)) if cfg.priority > 1 else 0.0
    lam_new = lam1_new + (1.0 - lam1_new) * lam2
    return phi_new, min(lam_new, 1.0), lam1_new


def solve_slot_fixed_point(h, cfg: MacConfig, mode=ANALYTIC, sf_length=None, damping=0.5,
                           tol=1e-8, max_iter=10_000, empirics=None, reps=2000, seed=0, fallback_after=1000):
    """Per-slot attempt and busy probabilities for h saturated contenders."""
    if h < 1:
        raise ValueError("h must be at least 1")
    sf_length = sf_length if sf_length is not None else cfg.sf_length(0)
    p_d = deference_probability(cfg, sf_length)
    if mode == SIM_CALIBRATED:
        emp = empirics or _empirics_for(h, cfg, sf_length, reps, seed)
        phi = min(max(emp.phi, 0.0), 1.0)
        return SlotFixedPoint(phi, emp.lam, 1.0 - (1.0 - phi) ** (h - 1), emp.p_d, h, emp.lam_first)
    if mode != ANALYTIC:
        raise ValueError(f"unknown mode {mode!r}")
    phi, lam, lam1 = 0.0, 0.0, 0.0
    if h == 1:
        phi, lam, lam1 = _renewal_update(0.0, 0.0, 0.0, 1, cfg)
        return SlotFixedPoint(phi, 0.0, 0.0, p_d, 1, 0.0, 1)
    step = 1.0 - damping
    last = np.inf
    for it in range(1, max_iter + 1):
        target = _renewal_update(phi, lam, lam1, h, cfg)
        resid = max(abs(a - b) for a, b in zip(target, (phi, lam, lam1)))
        if resid < tol:
            return SlotFixedPoint(phi, lam, 1.0 - (1.0 - phi) ** (h - 1), p_d, h, lam1, it)
        if resid > last:
            # oscillation: shrink the step rather than chase the cycle
            step = max(step * 0.5, 1e-3)
        last = resid
        phi, lam, lam1 = (x + step * (y - x) for x, y in zip((phi, lam, lam1), target))
        if it == fallback_after:
            # the capped busy term makes the map non-smooth and the damped pass can cycle;
            # polish from the current iterate with a Powell hybrid root search
            x0 = np.array([phi, lam, lam1])
            sol = root(lambda x: np.array(_renewal_update(*x, h, cfg)) - x, x0, method="hybr", tol=1e-13)
            if sol.success and np.all((sol.x >= 0) & (sol.x <= 1)):
                resid = np.abs(np.array(_renewal_update(*sol.x, h, cfg)) - sol.x).max()
                if resid < tol:
                    phi, lam, lam1 = (float(v) for v in sol.x)
                    return SlotFixedPoint(phi, lam, 1.0 - (1.0 - phi) ** (h - 1), p_d, h, lam1, it)
    raise FixedPointError(f"fixed point for h={h} did not converge", (phi, lam, lam1))


def _empirics_for(h, cfg, sf_length, reps, seed):
    from .macsim import estimate_empirics
    one = MacConfig(k_tau=1, bo=(0,), p_s=1.0, sf0=sf_length, nb=cfg.nb, priority=cfg.priority,
                    t_p=cfg.t_p, t_ack=cfg.t_ack, l_ack=cfg.l_ack, t_ack_timeout=cfg.t_ack_timeout)
    return estimate_empirics(h, one, reps, seed)


# ---------------------------------------------------------------- frame PGF

def _uniform_pgf(w):
    """PGF coefficients of a counter uniform on {0, ..., w}."""
    return np.full(w + 1, 1.0 / (w + 1))


def _delay(k):
    out = np.zeros(k + 1)
    out[k] = 1.0
    return out


def _mix(*parts):
    n = max(len(p) for _, p in parts)
    out = np.zeros(n)
    for w, p in parts:
        out[:len(p)] += w * p
    return out


@dataclass(frozen=True)
class FramePGF:
    """Polynomial PGFs (coefficient arrays) of the four frame types."""
    success: np.ndarray
    collision: np.ndarray
    cca_failure: np.ndarray
    deference: np.ndarray


def frame_pgfs(fp: SlotFixedPoint, cfg: MacConfig):
    lam = fp.lam
    lam1 = fp.lam_first if fp.lam_first is not None else lam
    share1 = lam1 / lam if lam > 0 else 1.0
    failed_cca = _mix((share1, _delay(1)), (1.0 - share1, _delay(min(2, cfg.priority))))
    reach = [np.array([1.0])]   # time to reach stage j after j busy attempts
    for j in range(cfg.nb + 1):
        reach.append(np.convolve(reach[-1], np.convolve(_uniform_pgf(cfg.window(j)), failed_cca)))
    weights = np.array([lam ** j for j in range(cfg.nb + 1)])
    weights /= weights.sum()
    to_tx = _mix(*[(weights[j], np.convolve(np.convolve(reach[j], _uniform_pgf(cfg.window(j))),
                                            _delay(cfg.priority))) for j in range(cfg.nb + 1)])
    return FramePGF(
        success=np.convolve(to_tx, _delay(cfg.l_s)),
        collision=np.convolve(to_tx, _delay(cfg.t_p + cfg.t_ack_timeout)),
        cca_failure=reach[cfg.nb + 1],
        deference=np.concatenate([[0.0], _uniform_pgf(cfg.l_s + cfg.priority - 1)]),
    )


def pgf_moments(coeffs):
    """(T'(1), T''(1)) of a polynomial PGF, by exact differentiation."""
    d1 = np.polynomial.polynomial.polyder(coeffs, 1)
    d2 = np.polynomial.polynomial.polyder(coeffs, 2)
    return float(d1.sum()), float(d2.sum())


@dataclass(frozen=True)
class FrameStats:
    p_succ: float
    p_coll: float
    p_ccas: float
    p_d: float
    t_bar: float
    sigma2: float
    source: str = ANALYTIC

    def __post_init__(self):
        total = self.p_succ + self.p_coll + self.p_ccas + self.p_d
        if abs(total - 1.0) > 1e-9:
            raise ModelInconsistency(f"outcome probabilities sum to {total}")
        if self.t_bar <= 0 or self.sigma2 < 0:
            raise ModelInconsistency("need t_bar > 0 and sigma2 >= 0")


def outcome_probabilities(fp: SlotFixedPoint, cfg: MacConfig):
    fail = fp.lam ** (cfg.nb + 1)
    p_ccas = (1.0 - fp.p_d) * fail
    p_coll = fp.p_c * (1.0 - fp.p_d) * (1.0 - fail)
    p_succ = 1.0 - p_coll - p_ccas - fp.p_d
    out = (p_succ, p_coll, p_ccas, fp.p_d)
    if any(p < -1e-12 or p > 1 + 1e-12 for p in out):
        raise ModelInconsistency(f"outcome probabilities {out} outside [0, 1]")
    return tuple(min(max(p, 0.0), 1.0) for p in out)


def frame_stats(fp: SlotFixedPoint, cfg: MacConfig):
    """Outcome probabilities and generic-frame mean/variance from T(z)."""
    probs = outcome_probabilities(fp, cfg)
    pg = frame_pgfs(fp, cfg)
    t = _mix(*zip(probs, (pg.success, pg.collision, pg.cca_failure, pg.deference)))
    d1, d2 = pgf_moments(t)
    return FrameStats(*probs, t_bar=d1, sigma2=max(d2 + d1 - d1 * d1, 0.0))


def frame_stats_from_empirics(emp, cfg: MacConfig, fp=None):
    """Outcome shares from the fixed point, moments from simulated frames."""
    fp = fp or SlotFixedPoint(emp.phi, emp.lam, 0.0, emp.p_d, 1)
    probs = outcome_probabilities(fp, cfg)
    return FrameStats(*probs, t_bar=emp.t_bar, sigma2=emp.sigma2, source=SIM_CALIBRATED)


def max_frames(sf_length, cfg):
    return sf_length // min(cfg.nb + 1, cfg.l_s + 2)


def frame_count_pmf(stats: FrameStats, sf_length, cfg: MacConfig):
    """Distribution of the number of frames in a superframe, K = 0..K_max."""
    if stats.t_bar <= 0:
        raise ValueError("t_bar must be positive")
    if sf_length < 1:
        raise ValueError("sf_length must be at least 1")
    k_max = max_frames(sf_length, cfg)
    out = np.zeros(k_max + 1)
    if stats.sigma2 == 0:
        out[min(int(sf_length // stats.t_bar), k_max)] = 1.0
        return out
    k = np.arange(1, k_max + 2)
    # Pr{first K frames fit} = 1 - Q((SF - K T)/sqrt(K s2)); masses are the differences
    fit = np.concatenate([[1.0], ndtr((sf_length - k * stats.t_bar) / np.sqrt(k * stats.sigma2))])
    out[:] = np.clip(fit[:-1] - fit[1:], 0.0, None)
    s = out.sum()
    if s <= 0:
        out[min(int(sf_length // stats.t_bar), k_max)] = 1.0
        return out
    return out / s


def sf_success_pmf(stats: FrameStats, k_s):
    """Successes among k_s frames with at most one deference frame."""
    if k_s < 0:
        raise ValueError("k_s must be non-negative")
    out = np.zeros(k_s + 1)
    logs = [log(p) if p > 0 else -np.inf for p in (stats.p_succ, stats.p_coll, stats.p_d, stats.p_ccas)]
    lf = [lgamma(i + 1) for i in range(k_s + 1)]
    for s in range(k_s + 1):
        acc = 0.0
        for kd in (0, 1):
            for j in range(k_s - s - kd + 1):
                ll = k_s - s - kd - j
                if ll < 0:
                    continue
                terms = [(s, logs[0]), (j, logs[1]), (kd, logs[2]), (ll, logs[3])]
                if any(c > 0 and lp == -np.inf for c, lp in terms):
                    continue
                acc += exp(lf[k_s] - lf[s] - lf[j] - lf[kd] - lf[ll]
                           + sum(c * lp for c, lp in terms if c > 0))
        out[s] = acc
    total = out.sum()
    if total <= 0:
        raise ModelInconsistency("success distribution has no mass")
    return out / total


def frames_kernel_row(h, sf_length, cfg, mode=ANALYTIC, **kw):
    """Successes in one superframe with h contenders via the frame composition."""
    if h == 0:
        return np.array([1.0])
    fp = solve_slot_fixed_point(h, cfg, mode, sf_length, **kw)
    stats = frame_stats(fp, cfg)
    pk = frame_count_pmf(stats, sf_length, cfg)
    out = np.zeros(h + 1)
    mass = 0.0
    for k_s, w in enumerate(pk):
        if w == 0:
            continue
        try:
            row = sf_success_pmf(stats, k_s)
        except ModelInconsistency:
            # k_s frames cannot occur (e.g. two deferences), condition it away
            continue
        mass += w
        out[:min(k_s, h) + 1] += w * row[:h + 1]
        if k_s > h:
            out[h] += w * row[h + 1:].sum()
    if mass == 0:
        out[0] = 1.0
        return out
    return out / mass


# ----------------------------------------------------------- slot chain kernel

@nb.njit(cache=True)
def _open_slot_rates(h, sf, nbk, prio, t_p, t_ack, l_ack, t_to, w0):
    """Mean-field pass conditioned on the channel phase.

    Node schedules (expected CCA counts per future slot, per backoff stage and
    attempt count) are kept separately for the open channel and for each blocked
    phase, i.e. a success or collision that began at a known slot. Returns, for each
    slot, the per-contender probability of starting a transmission given the
    channel is open.
    """
    l_s = t_p + t_ack + l_ack
    wmax = w0 << nbk
    hz = sf + wmax + l_s + t_to + prio + 8
    ns = l_s + prio      # slots a success keeps the channel from a new start
    nc = t_p + prio      # same for a collision
    nbkt = 1 + ns + nc
    J = nbk + 1
    w = np.zeros(nbkt)
    al = np.zeros(nbkt)
    sch = np.zeros((nbkt, hz, J, J))
    pend = np.zeros((nbkt, prio + 1, J, J))
    w[0] = 1.0
    al[0] = h
    for c in range(w0 + 1):
        sch[0, c, 0, 0] = h / (w0 + 1.0)
    q_open = np.zeros(sf)
    # schedules only reach this far ahead of the current slot
    reach = wmax + t_p + t_to + w0 + prio + 2
    for t in range(sf):
        lo, hi = t, min(hz, t + reach)
        # blocked phases that end at t rejoin the open channel
        for kind in range(2):
            life = ns if kind == 0 else nc
            tau = t - life
            if tau < 0:
                continue
            b = 1 + (tau % ns) if kind == 0 else 1 + ns + (tau % nc)
            if w[b] > 0:
                w[0] += w[b]
                al[0] += al[b]
                sch[0, lo:hi] += sch[b, lo:hi]
                pend[0] += pend[b]
            w[b] = 0.0
            al[b] = 0.0
            sch[b, lo:hi] = 0.0
            pend[b] = 0.0
        # nodes that cleared all CCAs transmit now
        m = pend[0, prio].sum()
        pend[0, prio] = 0.0
        if w[0] > 1e-15 and m > 0:
            mu = m / w[0]
            hh = max(al[0] / w[0], mu)
            q = min(mu / hh, 1.0)
            q_open[t] = q
            p0 = (1 - q) ** hh
            p1 = hh * q * (1 - q) ** max(hh - 1, 0.0)
            pc = max(1 - p0 - p1, 0.0)
            bs = 1 + (t % ns)
            bc = 1 + ns + (t % nc)
            # a node that did not start keeps its whole remaining schedule: rescale by 1/(1-q)
            keep = 1.0 / (1.0 - q) if q < 1.0 else 0.0
            f_s = p1 * (hh - 1.0) / hh * keep
            n_c = hh - (hh * q - p1) / pc if pc > 1e-300 else 0.0
            f_c = pc * max(n_c, 0.0) / hh * keep
            f_0 = p0 * keep
            w[bs] = p1 * w[0]
            al[bs] = p1 * (al[0] - w[0])
            sch[bs, lo:hi] = f_s * sch[0, lo:hi]
            pend[bs] = f_s * pend[0]
            w[bc] = pc * w[0]
            al[bc] = pc * al[0]
            sch[bc, lo:hi] = f_c * sch[0, lo:hi]
            pend[bc] = f_c * pend[0]
            coll = max(m - w[0] * p1, 0.0)
            back = t + t_p + t_to
            for c in range(w0 + 1):
                if back + c < hz:
                    sch[bc, back + c, 0, 0] += coll / (w0 + 1.0)
            w[0] *= p0
            al[0] *= p0
            sch[0, lo:hi] *= f_0
            pend[0] *= f_0
        # CCAs at slot t, phase by phase
        for b in range(nbkt):
            if w[b] <= 0:
                continue
            if b == 0:
                busy = False
            elif b <= ns:
                d = (t - (b - 1)) % ns
                busy = d < t_p or (t_p + t_ack <= d < l_s)
            else:
                d = (t - (b - 1 - ns)) % nc
                busy = d < t_p
            for qq in range(prio - 1, -1, -1):
                for j in range(J):
                    for a in range(J):
                        x = sch[b, t, j, a] if qq == 0 else pend[b, qq, j, a]
                        if x == 0:
                            continue
                        if qq == 0:
                            sch[b, t, j, a] = 0.0
                            if sf - t < prio + l_s:
                                # deferred: still undelivered, so it stays in the count
                                continue
                        else:
                            pend[b, qq, j, a] = 0.0
                        if not busy:
                            pend[b, qq + 1, j, a] += x
                            continue
                        if a + 1 >= J:
                            jn, an = 0, 0
                        else:
                            jn, an = min(j + 1, nbk), a + 1
                        ww = min(w0 << jn, wmax)
                        for c in range(ww + 1):
                            if t + 1 + c < hz:
                                sch[b, t + 1 + c, jn, an] += x / (ww + 1.0)
    return q_open


@nb.njit(cache=True)
def _chain_row(h, sf, q_open, prio, t_p, l_s):
    """Distribution of successes in one superframe.

    State: successes so far and the slots left before the channel reopens. At an
    open slot each of the h - k remaining contenders starts with probability
    q_open[t]; exactly one starter is a success, two or more a collision.
    """
    span = l_s + prio + 1
    p = np.zeros((h + 1, span))
    p[0, 0] = 1.0
    for t in range(sf):
        q = np.zeros((h + 1, span))
        for k in range(h + 1):
            for c in range(1, span):
                q[k, c - 1] += p[k, c]
        x = q_open[t]
        for k in range(h + 1):
            o = p[k, 0]
            if o == 0.0:
                continue
            r = h - k
            none = (1.0 - x) ** r
            one = r * x * (1.0 - x) ** (r - 1) if r >= 1 else 0.0
            q[k, 0] += o * none
            if k < h:
                q[k + 1, l_s + prio - 1] += o * one
            q[k, t_p + prio - 1] += o * max(1.0 - none - one, 0.0)
        p = q
    return p.sum(axis=1)


def chain_kernel_row(h, sf_length, cfg):
    if h == 0:
        return np.array([1.0])
    if cfg.priority <= cfg.t_ack:
        raise ValueError("slot chain needs priority > t_ack (an ACK must fail the CCA window)")
    q = _open_slot_rates(int(h), int(sf_length), cfg.nb, cfg.priority, cfg.t_p, cfg.t_ack,
                         cfg.l_ack, cfg.t_ack_timeout, cfg.w0)
    row = _chain_row(int(h), int(sf_length), q, cfg.priority, cfg.t_p, cfg.l_s)
    return row / row.sum()


def _mac_key(cfg):
    return (cfg.nb, cfg.priority, cfg.t_p, cfg.t_ack, cfg.l_ack, cfg.t_ack_timeout)


def _cfg_from_key(key):
    nbk, prio, t_p, t_ack, l_ack, t_to = key
    return MacConfig(k_tau=1, bo=(0,), p_s=1.0, sf0=t_p + t_ack + l_ack + prio, nb=nbk, priority=prio,
                     t_p=t_p, t_ack=t_ack, l_ack=l_ack, t_ack_timeout=t_to)


@lru_cache(maxsize=None)
def _kernel_cached(kernel, mode, h, sf_length, key, reps, seed):
    cfg = _cfg_from_key(key)
    if kernel == "chain":
        return chain_kernel_row(h, sf_length, cfg)
    if kernel == "frames":
        return frames_kernel_row(h, sf_length, cfg, mode, reps=reps, seed=seed)
    if kernel == "empirical":
        from .macsim import sf_success_histogram
        return sf_success_histogram(h, sf_length, cfg, reps, seed)
    raise ValueError(f"unknown kernel {kernel!r}")


def kernel_row(h, sf_length, cfg, kernel="chain", mode=ANALYTIC, reps=4000, seed=0):
    """Pr{K_succ,i = k | h_i = h} for one superframe of the given length."""
    if h == 0:
        return np.array([1.0])
    return _kernel_cached(kernel, mode, int(h), int(sf_length), _mac_key(cfg), int(reps), int(seed))


# ------------------------------------------------------------------ the DP

@dataclass
class SufficiencyReport:
    prob_sufficient: float
    per_h_terms: np.ndarray          # Pr{h contenders}
    conditional: np.ndarray          # Pr{K_succ >= m_S | h}
    per_sf_success_distributions: list = field(default_factory=list)


def _default_kernel(mode):
    return "chain" if mode == ANALYTIC else "empirical"


def transition_matrix(sf_length, n, cfg, kernel="chain", mode=ANALYTIC, reps=4000, seed=0):
    """T[r, r'] = Pr{r' contenders left after one superframe | r at its start}."""
    t = np.zeros((n + 1, n + 1))
    for r in range(n + 1):
        row = kernel_row(r, sf_length, cfg, kernel, mode, reps, seed)
        t[r, r - np.arange(len(row))] = row
    return t


def _transitions(n, cfg, kernel, mode, reps, seed):
    return [transition_matrix(sf, n, cfg, kernel, mode, reps, seed) for sf in cfg.sf_lengths]


def conditional_curve(n, m_s, cfg, kernel=None, mode=ANALYTIC, reps=4000, seed=0):
    """Pr{sum_i K_succ,i >= m_S | h} for h = 0..n, with h_{i+1} = h_i - K_succ,i."""
    kernel = kernel or _default_kernel(mode)
    return _cached_curve(n, m_s, tuple(cfg.sf_lengths), _mac_key(cfg), kernel, mode, reps, seed)


def conditional_sufficiency(h, m_s, cfg, kernel=None, mode=ANALYTIC, reps=4000, seed=0):
    return float(conditional_curve(h, m_s, cfg, kernel, mode, reps, seed)[h]) if h >= m_s else 0.0


def sufficiency_probability(n_s, m_s, cfg: MacConfig, mode=ANALYTIC, kernel=None, reps=4000, seed=0,
                            with_marginals=False):
    """Pr{K_succ >= m_S} for n_S nodes that each contend with probability cfg.p_s."""
    if not 1 <= m_s <= n_s:
        raise ValueError("need 1 <= m_S <= n_S")
    kernel = kernel or _default_kernel(mode)
    weights = contender_pmf(n_s, cfg.p_s)
    cond = conditional_curve(n_s, m_s, cfg, kernel, mode, reps, seed)
    prob = float(np.dot(weights, cond))
    marg = []
    if with_marginals:
        state = weights.copy()
        for t in _transitions(n_s, cfg, kernel, mode, reps, seed):
            dist = np.zeros(n_s + 1)
            for r in range(n_s + 1):
                # successes x = r - r'
                dist[:r + 1] += state[r] * t[r, r::-1]
            marg.append(dist)
            state = state @ t
    return SufficiencyReport(min(max(prob, 0.0), 1.0), weights, cond, marg)


@lru_cache(maxsize=4096)
def _cached_curve(n, m_s, sf_lengths, key, kernel, mode, reps, seed):
    cfg = _cfg_from_key(key)
    prod = np.eye(n + 1)
    for sf in sf_lengths:
        prod = prod @ transition_matrix(sf, n, cfg, kernel, mode, reps, seed)
    # successes h - r' >= m_S  <=>  r' <= h - m_S
    cum = np.cumsum(prod, axis=1)
    out = np.zeros(n + 1)
    for h in range(m_s, n + 1):
        out[h] = cum[h, h - m_s]
    out = np.clip(out, 0.0, 1.0)
    out.setflags(write=False)
    return out


def max_over_p_s(n_s, m_s, cfg, grid, **kw):
    """(best p_s, best probability, all probabilities) over a p_s grid."""
    probs = np.array([sufficiency_probability(n_s, m_s, cfg.with_profile(cfg.bo, p), **kw).prob_sufficient
                      for p in grid])
    k = int(np.argmax(probs))
    return float(grid[k]), float(probs[k]), probs
