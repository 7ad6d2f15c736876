"""MAC protocol constants and decision variables shared by the model and the simulator."""
from dataclasses import dataclass, field, replace

BO_MAX = 14


@dataclass(frozen=True)
class MacConfig:
    """Superframe CSMA/CA settings; all durations are in backoff slots.

    sf0 defaults to 12, the smallest base length that still fits `priority`
    CCAs plus one data/ACK exchange.
    """
    k_tau: int = 3
    bo: tuple = (4, 4, 4)
    p_s: float = 0.4
    sf0: int = 12
    nb: int = 5
    priority: int = 2
    t_p: int = 7
    t_ack: int = 1
    l_ack: int = 2
    t_ack_timeout: int = 4
    bo_max: int = BO_MAX

    def __post_init__(self):
        bo = tuple(int(b) for b in self.bo)
        object.__setattr__(self, "bo", bo)
        if self.k_tau < 1:
            raise ValueError("k_tau must be at least 1")
        if len(bo) != self.k_tau:
            raise ValueError(f"need one beacon order per superframe, got {len(bo)} for k_tau={self.k_tau}")
        if any(b < 0 or b > self.bo_max for b in bo):
            raise ValueError(f"beacon orders must lie in [0, {self.bo_max}]")
        if not 0.0 <= self.p_s <= 1.0:
            raise ValueError("p_s must lie in [0, 1]")
        if self.t_p < 1 or self.t_ack < 0 or self.l_ack < 0 or self.t_ack_timeout < 0:
            raise ValueError("durations must be non-negative with t_p >= 1")
        if self.nb < 0 or self.priority < 1:
            raise ValueError("nb must be >= 0 and priority >= 1")
        if self.priority <= self.t_ack:
            # otherwise a CCA window fits inside the ACK turnaround and a new sender hits the ACK
            raise ValueError("priority must exceed t_ack")
        if self.sf0 < self.l_s + self.priority:
            raise ValueError(f"sf0={self.sf0} cannot fit priority CCAs plus a transmission ({self.l_s + self.priority})")

    @property
    def l_s(self):
        return self.t_p + self.t_ack + self.l_ack

    @property
    def w0(self):
        return 2 ** self.priority

    def window(self, stage):
        """Backoff window W_j; the counter is drawn uniformly from {0, ..., W_j}."""
        return min(2 ** stage * self.w0, 2 ** self.nb * self.w0)

    def sf_length(self, i):
        return self.sf0 * 2 ** self.bo[i]

    @property
    def sf_lengths(self):
        return [self.sf_length(i) for i in range(self.k_tau)]

    @property
    def delay(self):
        return sum(self.sf_lengths)

    def with_profile(self, bo, p_s=None):
        bo = tuple(bo)
        return replace(self, k_tau=len(bo), bo=bo, p_s=self.p_s if p_s is None else p_s)


def uniform(k_tau, bo, p_s=0.4, **kw):
    return MacConfig(k_tau=k_tau, bo=(bo,) * k_tau, p_s=p_s, **kw)
