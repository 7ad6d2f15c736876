"""Kronecker measurement plans, the matrix-free forward operator and l1 recovery.

Vectorization stacks rows, so for X of shape (p, q), vec(X)[i*q + j] = X[i, j] and
(B kron C) vec(X) = vec(B X C^T).
"""
from dataclasses import dataclass, field

import numpy as np

from .wavelets import DimensionError, WaveletBasis, synthesize


ROW_SUBSAMPLING = "row_subsampling"
DENSE_UNIFORM = "dense_uniform"


@dataclass(frozen=True)
class MeasurementPlan:
    """Phi_S (m_S x n_S) and Phi_T (m_T x n_T) plus the index sets behind them.

    `node_sets`, when given, holds one node index set per selected RI (sizes may
    differ). The observation is then the flat vector of z[node_sets[j], selected_ris[j]]
    concatenated over j, and phi_s is None.
    """
    phi_s: np.ndarray | None
    phi_t: np.ndarray
    kind: str
    selected_nodes: np.ndarray | None = None
    selected_ris: np.ndarray | None = None
    seed: int | None = None
    node_sets: tuple | None = None
    n_s: int = 0

    @property
    def m_s(self):
        if self.node_sets is not None:
            return max(len(s) for s in self.node_sets)
        return self.phi_s.shape[0]

    @property
    def m_t(self):
        return self.phi_t.shape[0]

    @property
    def n_t(self):
        return self.phi_t.shape[1]

    @property
    def shape(self):
        return (self.n_s, self.n_t)


def selection_matrix(idx, n):
    out = np.zeros((len(idx), n))
    out[np.arange(len(idx)), idx] = 1.0
    return out


def make_measurement_plan(n_s, n_t, m_s, m_t, kind=ROW_SUBSAMPLING, seed=0):
    """Plans for different (m_S, m_T) at the same seed are nested."""
    if not (1 <= m_s <= n_s and 1 <= m_t <= n_t):
        raise ValueError(f"need 1 <= m_S <= n_S and 1 <= m_T <= n_T, got ({m_s}, {m_t}) for ({n_s}, {n_t})")
    rng = np.random.default_rng(seed)
    if kind == ROW_SUBSAMPLING:
        nodes = np.sort(rng.permutation(n_s)[:m_s])
        ris = np.sort(rng.permutation(n_t)[:m_t])
        return MeasurementPlan(selection_matrix(nodes, n_s), selection_matrix(ris, n_t), kind,
                               nodes, ris, seed, n_s=n_s)
    if kind == DENSE_UNIFORM:
        phi_s = rng.random((n_s, n_s))[:m_s]
        phi_t = rng.random((n_t, n_t))[:m_t]
        return MeasurementPlan(phi_s, phi_t, kind, seed=seed, n_s=n_s)
    raise ValueError(f"unknown plan kind {kind!r}")


def plan_from_deliveries(n_s, n_t, ris, node_sets):
    """Row-subsampling plan whose node set may change from one requested RI to the next."""
    ris = np.asarray(ris, dtype=int)
    sets = tuple(np.sort(np.asarray(s, dtype=int)) for s in node_sets)
    if len(sets) != len(ris):
        raise ValueError("one node set per requested RI")
    for s in sets:
        if len(np.unique(s)) != len(s) or (len(s) and (s[0] < 0 or s[-1] >= n_s)):
            raise ValueError("node sets must hold distinct indices in [0, n_S)")
    return MeasurementPlan(None, selection_matrix(ris, n_t), ROW_SUBSAMPLING, None, ris,
                           node_sets=sets, n_s=n_s)


def observe(z, plan):
    """Y = Phi_S Z Phi_T^T."""
    z = np.asarray(z, dtype=float)
    if z.shape != plan.shape:
        raise DimensionError(f"field {z.shape} does not match plan {plan.shape}")
    if plan.node_sets is not None:
        return np.concatenate([z[s, r] for s, r in zip(plan.node_sets, plan.selected_ris)])
    return plan.phi_s @ z @ plan.phi_t.T


class KroneckerOperator:
    """A -> vec((Phi_S Psi_S) A (Phi_T Psi_T)^T) without forming the Kronecker matrix."""

    def __init__(self, plan, psi_s, psi_t):
        if plan.shape != (psi_s.dimension, psi_t.dimension):
            raise DimensionError(f"plan {plan.shape} does not match bases")
        self.plan = plan
        self.psi_s = psi_s.matrix
        self.mt = plan.phi_t @ psi_t.matrix
        if plan.node_sets is None:
            self.ms = plan.phi_s @ psi_s.matrix
            self.mask = None
        else:
            self.ms = None
            self.mask = np.zeros((plan.n_s, plan.m_t), dtype=bool)
            for j, s in enumerate(plan.node_sets):
                self.mask[s, j] = True
        self.in_shape = plan.shape
        if self.mask is None:
            self.out_shape = (plan.m_s, plan.m_t)
        else:
            self.out_shape = (int(self.mask.sum()),)

    def forward(self, a):
        if self.mask is None:
            return self.ms @ a @ self.mt.T
        full = self.psi_s @ (a @ self.mt.T)
        return full.T[self.mask.T]

    def adjoint(self, y):
        if self.mask is None:
            return self.ms.T @ y @ self.mt
        g = np.zeros(self.mask.shape)
        g.T[self.mask.T] = y
        return self.psi_s.T @ g @ self.mt

    def lipschitz(self):
        """Squared spectral norm of the operator."""
        if self.mask is None:
            return np.linalg.norm(self.ms, 2) ** 2 * np.linalg.norm(self.mt, 2) ** 2
        # power iteration; masked rows of an orthonormal basis give a value <= ||Mt||^2
        x = np.random.default_rng(0).standard_normal(self.in_shape)
        val = 0.0
        for _ in range(50):
            x = self.adjoint(self.forward(x))
            nrm = np.linalg.norm(x)
            if nrm == 0:
                return 0.0
            val, x = nrm, x / nrm
        return val * 1.01

    def matrix(self):
        """Explicit (m_S m_T) x (n_S n_T) matrix, for testing on small fields only."""
        n = self.in_shape[0] * self.in_shape[1]
        cols = []
        for k in range(n):
            e = np.zeros(n)
            e[k] = 1.0
            cols.append(self.forward(e.reshape(self.in_shape)).ravel())
        return np.column_stack(cols)


@dataclass
class SolverConfig:
    epsilon: float = 0.0          # stop continuation once ||y - Ax|| <= epsilon * ||y||
    weight: float | None = None   # fixed l1 weight; None means continuation
    start_factor: float = 0.1
    decrease: float = 0.5
    final_factor: float = 1e-4
    tol: float = 1e-6
    max_iter: int = 5000


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    weights: list = field(default_factory=list)
    objective: list = field(default_factory=list)


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _objective(op, a, y, w):
    r = op.forward(a) - y
    return 0.5 * np.vdot(r, r) + w * np.abs(a).sum()


def mfista(op, y, w, x0, lip, tol, max_iter, history=None):
    """Monotone FISTA for 0.5||op(A) - y||^2 + w||A||_1; returns (A, iterations, converged)."""
    x = x0.copy()
    v = x0.copy()
    t = 1.0
    f_x = _objective(op, x, y, w)
    for it in range(1, max_iter + 1):
        grad = op.adjoint(op.forward(v) - y)
        z = soft_threshold(v - grad / lip, w / lip)
        f_z = _objective(op, z, y, w)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        x_prev, f_prev = x, f_x
        accepted = f_z <= f_x
        if accepted:
            x, f_x = z, f_z
        v = x + (t / t_next) * (z - x) + ((t - 1.0) / t_next) * (x - x_prev)
        t = t_next
        if history is not None:
            history.append(f_x)
        if accepted and abs(f_prev - f_x) <= tol * max(f_prev, np.finfo(float).tiny):
            return x, it, True
    return x, max_iter, False


def continuation_weights(top, cfg):
    start = cfg.start_factor * top
    floor = cfg.final_factor * start
    ws = []
    w = start
    while w > floor:
        ws.append(w)
        w *= cfg.decrease
    ws.append(floor)
    return ws


def reconstruct(y, plan, psi_s, psi_t, cfg=None, track_objective=False):
    """Recover Z* = Psi_S A* Psi_T^T from Y by l1-regularized least squares."""
    cfg = cfg or SolverConfig()
    y = np.asarray(y, dtype=float)
    op = KroneckerOperator(plan, psi_s, psi_t)
    if y.shape != op.out_shape:
        raise DimensionError(f"observation {y.shape} does not match plan {op.out_shape}")
    lip = op.lipschitz()
    a = np.zeros(op.in_shape)
    ynorm = np.linalg.norm(y)
    report = SolveReport(0, 0.0, True)
    if ynorm == 0 or lip == 0:
        return synthesize(a, psi_s, psi_t), a, report
    top = np.abs(op.adjoint(y)).max()
    weights = [cfg.weight] if cfg.weight is not None else continuation_weights(top, cfg)
    hist = [] if track_objective else None
    for w in weights:
        if hist is not None:
            hist.append(None)  # stage marker
        a, it, ok = mfista(op, y, w, a, lip, cfg.tol, cfg.max_iter, hist)
        report.iterations += it
        report.converged &= ok
        report.weights.append(w)
        if np.linalg.norm(op.forward(a) - y) <= cfg.epsilon * ynorm:
            break
    report.residual = float(np.linalg.norm(op.forward(a) - y))
    if hist is not None:
        report.objective = hist
    return synthesize(a, psi_s, psi_t), a, report


def mse(z, z_star):
    """Squared Frobenius error relative to the squared norm of the reference field."""
    z = np.asarray(z, dtype=float)
    z_star = np.asarray(z_star, dtype=float)
    if z.shape != z_star.shape:
        raise DimensionError(f"shapes differ: {z.shape} vs {z_star.shape}")
    ref = np.vdot(z, z)
    if ref == 0:
        raise ValueError("reference field is all zeros")
    d = z - z_star
    return float(np.vdot(d, d) / ref)
