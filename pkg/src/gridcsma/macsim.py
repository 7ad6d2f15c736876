"""Slot-level simulator of request-driven reporting over slotted CSMA/CA superframes.

Per reporting interval (RI) each node joins with probability p_s. Within a
superframe every undelivered contender starts at backoff stage 0; a busy CCA
raises the stage, and after NB+1 busy CCAs, or after a collision, the node
starts a fresh backoff in the same superframe. A node whose first CCA falls
closer than priority + l_s slots to the superframe end waits for the next one.
"""
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .macconfig import MacConfig

SUCCESS, COLLISION, CCA_FAILURE, DEFERENCE = 0, 1, 2, 3
FRAME_TYPES = ("success", "collision", "cca_failure", "deference")
PENDING = 4
STATUS_NAMES = FRAME_TYPES + ("pending",)

# node states inside the kernel
_BACKOFF, _CCA, _TX, _WAIT, _DEFERRED, _DONE = 0, 1, 2, 3, 4, 5


@nb.njit(cache=True)
def _rand_window(w):
    return np.random.randint(0, w + 1)


@nb.njit(cache=True)
def _run_ri(n, p_s, sf_lens, nbk, prio, t_p, t_ack, l_ack, t_to, seed, want_trace):
    np.random.seed(seed)
    l_s = t_p + t_ack + l_ack
    w0 = 1 << prio
    wmax = w0 << nbk
    k_sf = sf_lens.shape[0]
    bounds = np.zeros(k_sf + 1, np.int64)
    for i in range(k_sf):
        bounds[i + 1] = bounds[i] + sf_lens[i]
    total = bounds[k_sf]

    joined = np.zeros(n, np.bool_)
    for i in range(n):
        joined[i] = np.random.random() < p_s
    h = 0
    for i in range(n):
        if joined[i]:
            h += 1
    ids = np.empty(h, np.int64)
    k = 0
    for i in range(n):
        if joined[i]:
            ids[k] = i
            k += 1

    busy = np.zeros(total + l_s + 2, np.bool_)
    st = np.zeros(h, np.int64)
    ev = np.zeros(h, np.int64)
    stage = np.zeros(h, np.int64)
    att = np.zeros(h, np.int64)
    ccl = np.zeros(h, np.int64)
    ep0 = np.zeros(h, np.int64)
    last = np.full(h, -1, np.int64)
    done_at = np.full(h, -1, np.int64)
    succ_sf = np.zeros(k_sf, np.int64)
    stats = np.zeros(6, np.int64)  # attempts, busy attempts, busy at first CCA, active node-slots, frames, frame-slot sum
    cap = 16 if not want_trace else h * (total // 3 + 2) + 16
    frames = np.zeros((cap, 5), np.int64)
    nfr = 0
    order = np.full(h, -1, np.int64)
    ndel = 0
    starters = np.empty(max(h, 1), np.int64)

    cur = 0
    t_end = bounds[1]
    for j in range(h):
        ev[j] = _rand_window(w0)
    while True:
        tn = 1 << 62
        for j in range(h):
            if (st[j] < _DEFERRED) and ev[j] < tn:
                tn = ev[j]
        if tn >= t_end:
            # close the superframe
            for j in range(h):
                if st[j] == _DONE:
                    continue
                stats[3] += t_end - bounds[cur]
                if st[j] != _WAIT and ep0[j] < t_end:
                    if want_trace:
                        frames[nfr, 0] = cur
                        frames[nfr, 1] = ep0[j]
                        frames[nfr, 2] = DEFERENCE
                        frames[nfr, 3] = t_end - ep0[j]
                        frames[nfr, 4] = ids[j]
                        nfr += 1
                    stats[4] += 1
                    stats[5] += t_end - ep0[j]
                    last[j] = DEFERENCE
            cur += 1
            if cur >= k_sf:
                break
            t0 = bounds[cur]
            t_end = bounds[cur + 1]
            for j in range(h):
                if st[j] != _DONE:
                    st[j] = _BACKOFF
                    stage[j] = 0
                    att[j] = 0
                    ep0[j] = t0
                    last[j] = -1
                    ev[j] = t0 + _rand_window(w0)
            continue
        t = tn
        # transmissions start before any CCA of the same slot is evaluated
        ns = 0
        for j in range(h):
            if st[j] == _TX and ev[j] == t:
                starters[ns] = j
                ns += 1
        if ns > 0:
            for s in range(t, t + t_p):
                busy[s] = True
            if ns == 1:
                for s in range(t + t_p + t_ack, t + l_s):
                    busy[s] = True
                j = starters[0]
                st[j] = _DONE
                done_at[j] = t + l_s
                order[ndel] = j
                ndel += 1
                succ_sf[cur] += 1
                last[j] = SUCCESS
                if want_trace:
                    frames[nfr, 0] = cur
                    frames[nfr, 1] = ep0[j]
                    frames[nfr, 2] = SUCCESS
                    frames[nfr, 3] = t + l_s - ep0[j]
                    frames[nfr, 4] = ids[j]
                    nfr += 1
                stats[4] += 1
                stats[5] += t + l_s - ep0[j]
                stats[3] += t + l_s - bounds[cur]
            else:
                for q in range(ns):
                    j = starters[q]
                    st[j] = _WAIT
                    ev[j] = t + t_p + t_to
                    last[j] = COLLISION
                    if want_trace:
                        frames[nfr, 0] = cur
                        frames[nfr, 1] = ep0[j]
                        frames[nfr, 2] = COLLISION
                        frames[nfr, 3] = ev[j] - ep0[j]
                        frames[nfr, 4] = ids[j]
                        nfr += 1
                    stats[4] += 1
                    stats[5] += ev[j] - ep0[j]
                    ep0[j] = ev[j]
        for j in range(h):
            if ev[j] != t or st[j] >= _DEFERRED or st[j] == _TX:
                continue
            if st[j] == _WAIT:
                st[j] = _BACKOFF
                stage[j] = 0
                att[j] = 0
                ev[j] = t + _rand_window(w0)
                if ev[j] != t:
                    continue
            if st[j] == _BACKOFF:
                if t_end - t < prio + l_s:
                    st[j] = _DEFERRED
                    continue
                st[j] = _CCA
                ccl[j] = prio
                stats[0] += 1
            # st == _CCA
            if busy[t]:
                stats[1] += 1
                if ccl[j] == prio:
                    stats[2] += 1
                att[j] += 1
                if att[j] >= nbk + 1:
                    last[j] = CCA_FAILURE
                    if want_trace:
                        frames[nfr, 0] = cur
                        frames[nfr, 1] = ep0[j]
                        frames[nfr, 2] = CCA_FAILURE
                        frames[nfr, 3] = t + 1 - ep0[j]
                        frames[nfr, 4] = ids[j]
                        nfr += 1
                    stats[4] += 1
                    stats[5] += t + 1 - ep0[j]
                    ep0[j] = t + 1
                    att[j] = 0
                    stage[j] = 0
                else:
                    stage[j] = min(stage[j] + 1, nbk)
                st[j] = _BACKOFF
                ev[j] = t + 1 + _rand_window(min(w0 << stage[j], wmax))
            else:
                ccl[j] -= 1
                ev[j] = t + 1
                if ccl[j] == 0:
                    st[j] = _TX

    status = np.full(h, PENDING, np.int64)
    for j in range(h):
        if st[j] == _DONE:
            status[j] = SUCCESS
        elif st[j] == _DEFERRED:
            status[j] = DEFERENCE
        elif st[j] == _WAIT:
            status[j] = COLLISION
        elif last[j] == CCA_FAILURE:
            status[j] = CCA_FAILURE
    delivered = np.empty(ndel, np.int64)
    for q in range(ndel):
        delivered[q] = ids[order[q]]
    return ids, succ_sf, delivered, status, busy[:total], frames[:nfr], stats


@dataclass
class SlotTrace:
    busy: np.ndarray            # per-slot channel occupancy
    frames: np.ndarray          # rows: sf_index, start_slot, frame_type, length, node_id
    sf_successes: np.ndarray

    def frame_rows(self):
        for sf, start, kind, length, node in self.frames:
            yield int(sf), int(start), FRAME_TYPES[kind], int(length), int(node)


@dataclass
class SimResult:
    k_succ_total: int
    k_succ_per_sf: np.ndarray
    delivered: np.ndarray       # node ids in delivery order
    contenders: np.ndarray      # node ids that joined the contention
    status: np.ndarray          # per contender, index into STATUS_NAMES
    elapsed: int
    counters: np.ndarray = field(repr=False, default=None)
    trace: SlotTrace | None = None

    def status_counts(self):
        return {name: int(np.sum(self.status == i)) for i, name in enumerate(STATUS_NAMES)}


def _kernel_args(cfg):
    return (cfg.nb, cfg.priority, cfg.t_p, cfg.t_ack, cfg.l_ack, cfg.t_ack_timeout)


def _seed32(seed):
    return int(np.random.SeedSequence(int(seed)).generate_state(1)[0] & 0x7FFFFFFF)


def simulate_ri(n_s, cfg: MacConfig, seed, trace=False, p_s=None):
    """Simulate one reporting interval of K_tau superframes."""
    sf = np.asarray(cfg.sf_lengths, dtype=np.int64)
    ps = cfg.p_s if p_s is None else p_s
    ids, succ, delivered, status, busy, frames, stats = _run_ri(
        int(n_s), float(ps), sf, *_kernel_args(cfg), _seed32(seed), bool(trace))
    tr = SlotTrace(busy, frames, succ) if trace else None
    return SimResult(int(succ.sum()), succ, delivered, ids, status, int(sf.sum()), stats, tr)


@nb.njit(cache=True)
def _count_reps(n, m, p_s, sf, nbk, prio, t_p, t_ack, l_ack, t_to, seeds):
    hits = 0
    for r in range(seeds.shape[0]):
        out = _run_ri(n, p_s, sf, nbk, prio, t_p, t_ack, l_ack, t_to, seeds[r], False)
        if out[1].sum() >= m:
            hits += 1
    return hits


def replication_seeds(seed, reps):
    return (np.random.SeedSequence(int(seed)).generate_state(reps) & 0x7FFFFFFF).astype(np.int64)


def sufficiency_estimate(n_s, m_s, cfg, reps, seed=0, p_s=None):
    """Monte Carlo Pr{K_succ >= m_S} with its standard error."""
    sf = np.asarray(cfg.sf_lengths, dtype=np.int64)
    ps = cfg.p_s if p_s is None else p_s
    hits = _count_reps(int(n_s), int(m_s), float(ps), sf, *_kernel_args(cfg), replication_seeds(seed, reps))
    p = hits / reps
    return p, np.sqrt(p * (1 - p) / reps)


@nb.njit(cache=True)
def _sf_success_counts(h, sf_len, nbk, prio, t_p, t_ack, l_ack, t_to, seeds):
    sf = np.array([sf_len], np.int64)
    out = np.zeros(h + 1, np.int64)
    for r in range(seeds.shape[0]):
        res = _run_ri(h, 1.0, sf, nbk, prio, t_p, t_ack, l_ack, t_to, seeds[r], False)
        out[res[1][0]] += 1
    return out


def sf_success_histogram(h, sf_length, cfg, reps, seed=0):
    """Empirical distribution of successes in one superframe with h contenders."""
    counts = _sf_success_counts(int(h), int(sf_length), *_kernel_args(cfg), replication_seeds(seed, reps))
    return counts / reps


@dataclass
class Empirics:
    phi: float
    lam: float
    lam_first: float
    p_d: float
    t_bar: float
    sigma2: float
    frame_counts: np.ndarray    # per (replication, node) frames in the first superframe
    sufficiency: float
    stderr: dict


def estimate_empirics(n_s, cfg, replications, seed=0, m_s=None, p_s=None):
    """Pooled slot-level statistics over independent replications.

    phi: CCA attempts per active node-slot; lam: share of attempts that met a busy
    channel (lam_first: busy at the first CCA); p_d: share of frames that are
    deference; t_bar/sigma2: moments of frame lengths; frame_counts: frames per
    contender in the first superframe.
    """
    if replications < 1:
        raise ValueError("replications must be at least 1")
    m_s = m_s if m_s is not None else 1
    att = busy = first = active = 0
    lengths, types, counts, suff = [], [], [], []
    phis = []
    for s in replication_seeds(seed, replications):
        res = simulate_ri(n_s, cfg, int(s), trace=True, p_s=p_s)
        c = res.counters
        att += c[0]
        busy += c[1]
        first += c[2]
        active += c[3] if len(res.contenders) else 0
        fr = res.trace.frames
        lengths.append(fr[:, 3])
        types.append(fr[:, 2])
        first_sf = fr[fr[:, 0] == 0]
        for node in res.contenders:
            counts.append(int(np.sum(first_sf[:, 4] == node)))
        suff.append(res.k_succ_total >= m_s)
        if c[3] > 0:
            phis.append(c[0] / c[3])
    lengths = np.concatenate(lengths) if lengths else np.zeros(0)
    types = np.concatenate(types) if types else np.zeros(0)
    phi = att / active if active else 0.0
    lam = busy / att if att else 0.0
    lam_first = first / att if att else 0.0
    p_d = float(np.mean(types == DEFERENCE)) if len(types) else 0.0
    t_bar = float(lengths.mean()) if len(lengths) else 0.0
    sigma2 = float(lengths.var()) if len(lengths) else 0.0
    p = float(np.mean(suff))
    se = {
        "phi": float(np.std(phis) / np.sqrt(len(phis))) if len(phis) > 1 else 0.0,
        "lam": float(np.sqrt(lam * (1 - lam) / att)) if att else 0.0,
        "t_bar": float(lengths.std() / np.sqrt(len(lengths))) if len(lengths) > 1 else 0.0,
        "sufficiency": float(np.sqrt(p * (1 - p) / replications)),
    }
    return Empirics(phi, lam, lam_first, p_d, t_bar, sigma2, np.asarray(counts), p, se)
