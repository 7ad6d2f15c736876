"""Simulator invariants shared by the unit and acceptance suites."""
import numpy as np

from gridcsma import macsim


def check_invariants(n_s, cfg, seed):
    res = macsim.simulate_ri(n_s, cfg, seed, trace=True)
    counts = res.status_counts()
    # every contender ends in exactly one state
    assert sum(counts.values()) == len(res.contenders)
    assert counts["success"] == res.k_succ_total == len(res.delivered) == res.k_succ_per_sf.sum()
    assert len(set(res.delivered.tolist())) == len(res.delivered)
    assert set(res.delivered.tolist()) <= set(res.contenders.tolist())
    assert res.k_succ_total <= len(res.contenders)
    bounds = np.concatenate([[0], np.cumsum(cfg.sf_lengths)])
    tx = []
    for sf, start, kind, length, node in res.trace.frame_rows():
        end = start + length
        assert bounds[sf] <= start
        if kind != "collision":
            assert end <= bounds[sf + 1]
        if kind == "success":
            tx.append((end - cfg.l_s, end, True))
            # data and ACK occupy the channel
            assert res.trace.busy[end - cfg.l_s:end - cfg.l_s + cfg.t_p].all()
            assert res.trace.busy[end - cfg.l_ack:end].all()
        elif kind == "collision":
            # the ACK timeout may be cut by the superframe end, the transmission may not
            s = end - cfg.t_ack_timeout - cfg.t_p
            assert s >= bounds[sf] and s + cfg.t_p <= bounds[sf + 1]
            tx.append((s, s + cfg.t_p, False))
    # a success never overlaps any other transmission
    tx.sort()
    for (s1, e1, ok1), (s2, e2, ok2) in zip(tx, tx[1:]):
        if ok1 or ok2:
            assert e1 <= s2 or (not ok1 and not ok2)
    per_sf = np.zeros(cfg.k_tau, int)
    for sf, _, kind, _, _ in res.trace.frame_rows():
        per_sf[sf] += kind == "success"
    assert np.array_equal(per_sf, res.k_succ_per_sf)
    return res
