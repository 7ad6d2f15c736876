"""Synthetic injected-power fields: daily harmonic trend plus AR(1) fluctuation.

A node series is X_t = X^d_t + X^s_t with
    X^d_t = chi_0 + sum_i chi_re_i sin(2 pi k_i t / P) + chi_im_i cos(2 pi k_i t / P)
    X^s_{t+1} = phi_t X^s_t + U_t,  U_t ~ N(0, 1 - phi_t)
and injected power is generation minus load.
"""
from dataclasses import dataclass, field, replace

import numpy as np


PERIOD = 288  # 5-minute reporting intervals per day


@dataclass(frozen=True)
class HarmonicModel:
    chi_0: float = 0.0
    harmonics: tuple = ()   # (k, chi_re, chi_im)
    period: int = PERIOD

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("period must be positive")
        for k, _, _ in self.harmonics:
            if not 0 < k <= self.period // 2:
                raise ValueError(f"harmonic index {k} outside (0, {self.period // 2}]")

    @property
    def m_h(self):
        return len(self.harmonics)


@dataclass(frozen=True)
class ArProcess:
    """AR(1) coefficients indexed by time-of-day slot; innovation variance is 1 - phi_t."""
    phi: np.ndarray

    def __post_init__(self):
        phi = np.atleast_1d(np.asarray(self.phi, dtype=float))
        if np.any(np.abs(phi) >= 1):
            raise ValueError("AR(1) coefficients must satisfy |phi| < 1")
        object.__setattr__(self, "phi", phi)

    @classmethod
    def constant(cls, phi, period=PERIOD):
        return cls(np.full(period, float(phi)))

    def coefficient(self, t):
        return self.phi[np.asarray(t) % len(self.phi)]


def deterministic_component(model, t):
    t = np.asarray(t, dtype=float)
    out = np.full(t.shape, float(model.chi_0))
    for k, re, im in model.harmonics:
        w = 2.0 * np.pi * k * t / model.period
        out = out + re * np.sin(w) + im * np.cos(w)
    return out if out.ndim else float(out)


def step_stochastic(proc, x_prev, t, rng):
    """One AR(1) step; `rng` only needs a standard_normal(size) method."""
    phi = proc.coefficient(t)
    if np.any(np.abs(phi) >= 1):
        raise ValueError("AR(1) coefficient must satisfy |phi| < 1")
    x_prev = np.asarray(x_prev, dtype=float)
    u = rng.standard_normal(x_prev.shape) * np.sqrt(1.0 - phi)
    out = phi * x_prev + u
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class NodeLayout:
    n_s: int
    generator_nodes: np.ndarray
    distances: np.ndarray
    correlation_scale: float = 20.0   # km

    def correlation(self):
        return np.exp(-self.distances / self.correlation_scale)


def make_layout(n_s, seed=0, generator_fraction=0.5, span=1.0, correlation_scale=20.0, geometry="feeder"):
    """Node positions such that every pairwise distance lies in (0, span] km.

    "feeder" puts nodes in index order along a line of length `span`; "disc" scatters
    them uniformly in a disc of diameter `span`. Generators occupy the first
    `generator_fraction` of node indices.
    """
    rng = np.random.default_rng(seed)
    if geometry == "feeder":
        pos = np.sort(rng.random(n_s))[:, None] * span
    elif geometry == "disc":
        r = 0.5 * span * np.sqrt(rng.random(n_s))
        theta = 2.0 * np.pi * rng.random(n_s)
        pos = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    else:
        raise ValueError(f"unknown geometry {geometry!r}")
    d = np.sqrt(((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1))
    d = np.maximum(d, 1e-9)
    np.fill_diagonal(d, 0.0)
    gens = np.arange(int(round(generator_fraction * n_s)))
    return NodeLayout(n_s, gens, d, correlation_scale)


def sqrt_correlation(c, floor=1e-10):
    """Symmetric square root of a correlation matrix with eigenvalues floored at `floor`."""
    c = 0.5 * (c + c.T)
    vals, vecs = np.linalg.eigh(c)
    if not np.all(np.isfinite(vals)):
        raise ValueError("correlation matrix has non-finite eigenvalues")
    root = (vecs * np.sqrt(np.maximum(vals, floor))) @ vecs.T
    if not np.all(np.isfinite(root)):
        raise ValueError("could not form a square root of the correlation matrix")
    return root


@dataclass(frozen=True)
class GridScenario:
    layout: NodeLayout
    load_trend: HarmonicModel
    load_noise: ArProcess
    gen_trend: HarmonicModel
    gen_noise: ArProcess
    seed: int = 0
    start: int | None = None   # time-of-day of the first RI; None draws it from the seed
    load_scale: np.ndarray | None = None   # per-node multipliers, default 1
    gen_scale: np.ndarray | None = None
    load_step: float = 0.0   # per-node log step of a random-walk scale profile, drawn per seed
    gen_step: float = 0.0

    def __post_init__(self):
        if self.load_trend.period != self.gen_trend.period:
            raise ValueError("load and generation models use different periods")


def _ar_paths(proc, n_nodes, t0, n_t, burn_in, rng, mix=None):
    x = np.zeros(n_nodes)
    out = np.empty((n_nodes, n_t))
    start = t0 - burn_in
    for step in range(burn_in + n_t):
        t = start + step
        phi = proc.coefficient(t)
        u = rng.standard_normal(n_nodes)
        if mix is not None:
            u = mix @ u
        x = phi * x + np.sqrt(1.0 - phi) * u
        if step >= burn_in:
            out[:, step - burn_in] = x
    return out


def node_scales(scenario):
    """Per-node load and generation multipliers (None means all ones)."""
    n = scenario.layout.n_s
    out = []
    for fixed, step, offset in ((scenario.load_scale, scenario.load_step, 1),
                                (scenario.gen_scale, scenario.gen_step, 2)):
        if fixed is not None:
            out.append(np.asarray(fixed, dtype=float))
        elif step > 0:
            out.append(smooth_profile(n, step * np.sqrt(n), scenario.seed + offset))
        else:
            out.append(None)
    return out


def generate_field(scenario, n_t):
    """n_S x n_T injected power (generation minus load), reproducible from the scenario seed."""
    if n_t <= 0:
        raise ValueError("n_T must be positive")
    lay = scenario.layout
    period = scenario.load_trend.period
    rng = np.random.default_rng(scenario.seed)
    t0 = int(rng.integers(period)) if scenario.start is None else int(scenario.start)
    t = np.arange(t0, t0 + n_t)
    load = deterministic_component(scenario.load_trend, t)[None, :] + \
        _ar_paths(scenario.load_noise, lay.n_s, t0, n_t, period, rng)
    load_scale, gen_scale = node_scales(scenario)
    if load_scale is not None:
        load = load * load_scale[:, None]
    z = -load
    g = len(lay.generator_nodes)
    if g:
        c = lay.correlation()[np.ix_(lay.generator_nodes, lay.generator_nodes)]
        gen = deterministic_component(scenario.gen_trend, t)[None, :] + \
            _ar_paths(scenario.gen_noise, g, t0, n_t, period, rng, mix=sqrt_correlation(c))
        if gen_scale is not None:
            gen = gen * gen_scale[lay.generator_nodes, None]
        z[lay.generator_nodes] += gen
    return z


def fit_harmonics(series, period=PERIOD, max_harmonics=None):
    """OLS harmonic fit; the harmonic count is picked by BIC among nested candidate sets.

    Candidates are ordered by periodogram magnitude at the frequencies k / period.
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 2 * period:
        raise ValueError(f"need at least {2 * period} samples, got {n}")
    if np.ptp(x) == 0:
        return HarmonicModel(float(x[0]), (), period)
    kmax = period // 2
    if max_harmonics is None:
        max_harmonics = min(kmax, 24)
    t = np.arange(n)
    ks = np.arange(1, kmax + 1)
    w = 2.0 * np.pi * np.outer(t, ks) / period
    centered = x - x.mean()
    power = (centered @ np.sin(w)) ** 2 + (centered @ np.cos(w)) ** 2
    order = ks[np.argsort(-power, kind="stable")][:max_harmonics]

    best = None
    for m in range(len(order) + 1):
        chosen = order[:m]
        cols = [np.ones(n)]
        for k in chosen:
            cols += [np.sin(2 * np.pi * k * t / period), np.cos(2 * np.pi * k * t / period)]
        design = np.column_stack(cols)
        coef, *_ = np.linalg.lstsq(design, x, rcond=None)
        rss = float(((x - design @ coef) ** 2).sum())
        p = design.shape[1]
        bic = n * np.log(max(rss, 1e-300) / n) + p * np.log(n)
        if best is None or bic < best[0]:
            harm = tuple((int(k), float(coef[1 + 2 * i]), float(coef[2 + 2 * i])) for i, k in enumerate(chosen))
            best = (bic, HarmonicModel(float(coef[0]), harm, period))
    return best[1]


def bic(series, model):
    x = np.asarray(series, dtype=float)
    n = len(x)
    rss = float(((x - deterministic_component(model, np.arange(n))) ** 2).sum())
    return n * np.log(max(rss, 1e-300) / n) + (1 + 2 * model.m_h) * np.log(n)


def fit_ar1(residuals, period=PERIOD, clamp=0.999):
    """Per time-of-day OLS slope of X_{t+1} on X_t (no intercept), clamped."""
    x = np.asarray(residuals, dtype=float)
    prev, nxt = x[:-1], x[1:]
    slot = np.arange(len(prev)) % period
    phi = np.zeros(period)
    for s in range(period):
        sel = slot == s
        if sel.sum() < 2:
            raise ValueError(f"time-of-day slot {s} has fewer than 2 transitions")
        den = np.dot(prev[sel], prev[sel])
        phi[s] = np.dot(prev[sel], nxt[sel]) / den if den > 0 else 0.0
    return ArProcess(np.clip(phi, -clamp, clamp))


def smooth_profile(n, spread, seed, roughness=0.0):
    """Positive per-node multipliers: exp of a zero-mean random walk over node index.

    `spread` is the walk's end-to-end standard deviation; `roughness` adds an
    independent per-node log-normal component.
    """
    rng = np.random.default_rng(seed)
    walk = np.cumsum(rng.standard_normal(n)) * spread / np.sqrt(n)
    walk -= walk.mean()
    return np.exp(walk + roughness * rng.standard_normal(n))


def with_seed(scenario, seed):
    return replace(scenario, seed=seed)


# Default synthetic preset: a residential load curve and a solar-like generation curve on a
# 1 km feeder, tuned so that Kronecker CS thresholds land near the published desk figures.
DEFAULT_PRESET = {
    "amplitude": 3.0,
    "load_trend": (5.0, ((1, 2.0, -1.5), (2, 0.8, 0.5), (3, 0.3, 0.2))),
    "gen_trend": (3.0, ((1, 2.5, 0.0), (2, -0.8, 0.3))),
    "load_phi": 0.5,
    "gen_phi": 0.7,
    "profile_step": 0.033,
    "generator_fraction": 0.5,
    "span": 1.0,
    "correlation_scale": 20.0,
}


def _scaled_trend(spec, a):
    chi_0, harm = spec
    return HarmonicModel(chi_0 * a, tuple((int(k), re * a, im * a) for k, re, im in harm))


def default_scenario(n_s, seed=0, layout_seed=0, **overrides):
    """Scenario built from DEFAULT_PRESET; keyword overrides replace preset entries."""
    p = {**DEFAULT_PRESET, **overrides}
    unknown = set(p) - set(DEFAULT_PRESET)
    if unknown:
        raise ValueError(f"unknown preset keys {sorted(unknown)}")
    a = p["amplitude"]
    lay = make_layout(n_s, layout_seed, p["generator_fraction"], p["span"], p["correlation_scale"])
    return GridScenario(lay, _scaled_trend(p["load_trend"], a), ArProcess.constant(p["load_phi"]),
                        _scaled_trend(p["gen_trend"], a), ArProcess.constant(p["gen_phi"]), seed,
                        load_step=p["profile_step"], gen_step=p["profile_step"])


def _parse_trend(text):
    """'chi0; k re im; k re im ...' -> (chi0, ((k, re, im), ...))."""
    parts = [x.split() for x in text.split(";")]
    chi_0 = float(parts[0][0])
    harm = tuple((int(k), float(re), float(im)) for k, re, im in (q for q in parts[1:] if q))
    return chi_0, harm


def preset_from_section(section):
    """Preset overrides from a configparser section (unknown keys are rejected)."""
    out = {}
    for key, val in section.items():
        if key in ("load_trend", "gen_trend"):
            out[key] = _parse_trend(val)
        elif key in DEFAULT_PRESET:
            out[key] = float(val)
        else:
            raise ValueError(f"unknown scenario key {key!r}")
    return out
