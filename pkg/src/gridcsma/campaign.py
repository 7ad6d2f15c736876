"""Request-driven data collection: pick RIs, simulate the MAC in each, reconstruct."""
from dataclasses import dataclass, field

import numpy as np

from .cs import SolverConfig, mse, observe, plan_from_deliveries, reconstruct
from .macsim import simulate_ri
from .wavelets import build_wavelet_basis


@dataclass
class CampaignResult:
    requested_ris: np.ndarray
    node_sets: list              # first m_S deliveries per requested RI (fewer on a shortfall)
    elapsed: list                # slots per requested RI
    results: list = field(repr=False, default_factory=list)
    m_s: int = 0
    plan: object = None
    observation: np.ndarray | None = None

    @property
    def shortfalls(self):
        return [int(r) for r, s in zip(self.requested_ris, self.node_sets) if len(s) < self.m_s]

    @property
    def sufficient(self):
        return not self.shortfalls

    @property
    def delay(self):
        return int(sum(self.elapsed))

    def rows(self):
        """Rows for the `ri,delivered_nodes,elapsed_slots` export."""
        for ri, res, e in zip(self.requested_ris, self.results, self.elapsed):
            yield int(ri), ";".join(str(int(x)) for x in res.delivered), int(e)


def choose_ris(n_t, m_t, seed):
    if not 1 <= m_t <= n_t:
        raise ValueError("need 1 <= m_T <= n_T")
    return np.sort(np.random.default_rng(seed).permutation(n_t)[:m_t])


def simulate_reporting_campaign(z, m_s, m_t, cfg, seed, ris=None):
    """Run the MAC in each requested RI and keep the first m_S distinct deliveries."""
    z = np.asarray(z, dtype=float)
    n_s, n_t = z.shape
    if not 1 <= m_s <= n_s:
        raise ValueError("need 1 <= m_S <= n_S")
    ss = np.random.SeedSequence(int(seed))
    ri_seed, mac_seed = ss.spawn(2)
    ris = choose_ris(n_t, m_t, ri_seed) if ris is None else np.sort(np.asarray(ris, dtype=int))
    mac_seeds = mac_seed.generate_state(len(ris))
    sets, elapsed, results = [], [], []
    for ri, s in zip(ris, mac_seeds):
        res = simulate_ri(n_s, cfg, int(s))
        sets.append(res.delivered[:m_s])
        elapsed.append(res.elapsed)
        results.append(res)
    out = CampaignResult(ris, sets, elapsed, results, m_s)
    out.plan = plan_from_deliveries(n_s, n_t, ris, sets)
    out.observation = observe(z, out.plan)
    return out


def campaign_reconstruction(z, m_s, m_t, cfg, seed, solver: SolverConfig | None = None):
    """(campaign, recovered field, MSE); short RIs contribute what they delivered.

    Field and MSE are None when nothing at all was delivered.
    """
    camp = simulate_reporting_campaign(z, m_s, m_t, cfg, seed)
    if camp.observation.size == 0:
        return camp, None, None
    n_s, n_t = np.shape(z)
    psi_s, psi_t = build_wavelet_basis(n_s), build_wavelet_basis(n_t)
    z_star, _, _ = reconstruct(camp.observation, camp.plan, psi_s, psi_t, solver)
    return camp, z_star, mse(z, z_star)
