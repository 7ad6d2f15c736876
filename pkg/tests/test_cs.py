import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridcsma import cs
from gridcsma.wavelets import DimensionError, build_wavelet_basis


def _bases(n_s, n_t):
    return build_wavelet_basis(n_s), build_wavelet_basis(n_t)


def test_full_plan_is_permutation_of_identity():
    p = cs.make_measurement_plan(8, 4, 8, 4, seed=5)
    for phi, n in ((p.phi_s, 8), (p.phi_t, 4)):
        assert phi.shape == (n, n)
        assert np.array_equal(phi.sum(0), np.ones(n))
        assert np.array_equal(phi.sum(1), np.ones(n))


def test_row_subsampling_invariants():
    p = cs.make_measurement_plan(128, 128, 47, 68, seed=11)
    assert p.phi_s.shape == (47, 128) and p.phi_t.shape == (68, 128)
    assert len(np.unique(p.selected_nodes)) == 47 and len(np.unique(p.selected_ris)) == 68
    for phi in (p.phi_s, p.phi_t):
        assert np.all(phi.sum(1) == 1) and set(np.unique(phi)) <= {0.0, 1.0}


def test_plan_determinism():
    a = cs.make_measurement_plan(16, 16, 5, 7, seed=42)
    b = cs.make_measurement_plan(16, 16, 5, 7, seed=42)
    assert np.array_equal(a.phi_s, b.phi_s) and np.array_equal(a.phi_t, b.phi_t)
    d1 = cs.make_measurement_plan(16, 16, 5, 7, cs.DENSE_UNIFORM, seed=42)
    d2 = cs.make_measurement_plan(16, 16, 5, 7, cs.DENSE_UNIFORM, seed=42)
    assert np.array_equal(d1.phi_s, d2.phi_s)
    assert np.all((d1.phi_s >= 0) & (d1.phi_s < 1))


@pytest.mark.parametrize("m", [(0, 1), (1, 0), (9, 1), (1, 9)])
def test_plan_rejects_out_of_range(m):
    with pytest.raises(ValueError):
        cs.make_measurement_plan(8, 8, *m)


def test_observe_permutation_and_zero():
    z = np.arange(32.0).reshape(8, 4)
    p = cs.make_measurement_plan(8, 4, 8, 4, seed=1)
    y = cs.observe(z, p)
    assert np.array_equal(y, z[p.selected_nodes][:, p.selected_ris])
    assert np.array_equal(cs.observe(np.zeros((8, 4)), p), np.zeros((8, 4)))


def test_observe_submatrix():
    z = np.random.default_rng(0).standard_normal((4, 4))
    p = cs.make_measurement_plan(4, 4, 2, 2, seed=3)
    assert np.allclose(cs.observe(z, p), p.phi_s @ z @ p.phi_t.T)
    assert np.allclose(cs.observe(z, p), z[np.ix_(p.selected_nodes, p.selected_ris)])


def test_observe_dimension_mismatch():
    p = cs.make_measurement_plan(4, 4, 2, 2)
    with pytest.raises(DimensionError):
        cs.observe(np.zeros((4, 8)), p)


@pytest.mark.parametrize("kind", [cs.ROW_SUBSAMPLING, cs.DENSE_UNIFORM])
def test_matrix_free_matches_kronecker(kind):
    rng = np.random.default_rng(1)
    for n_s in (2, 4, 8):
        for n_t in (2, 4, 8):
            ps, pt = _bases(n_s, n_t)
            p = cs.make_measurement_plan(n_s, n_t, max(1, n_s // 2), max(1, n_t - 1), kind, seed=n_s * n_t)
            op = cs.KroneckerOperator(p, ps, pt)
            # row-stacking vec: (B kron C) vec(X) = vec(B X C^T)
            big = np.kron(p.phi_s, p.phi_t) @ np.kron(ps.matrix, pt.matrix)
            a = rng.standard_normal((n_s, n_t))
            assert np.abs(op.forward(a).ravel() - big @ a.ravel()).max() <= 1e-10
            y = rng.standard_normal(op.out_shape)
            assert np.abs(op.adjoint(y).ravel() - big.T @ y.ravel()).max() <= 1e-10


def test_ragged_plan_operator_and_observation():
    rng = np.random.default_rng(2)
    z = rng.standard_normal((8, 8))
    sets = [[1, 5, 6], [0], [2, 3, 4, 7]]
    p = cs.plan_from_deliveries(8, 8, [6, 1, 3], sets)
    assert p.m_s == 4 and list(p.selected_ris) == [6, 1, 3]
    y = cs.observe(z, p)
    expected = np.concatenate([z[[1, 5, 6], 6], z[[0], 1], z[[2, 3, 4, 7], 3]])
    assert np.array_equal(y, expected)
    ps, pt = _bases(8, 8)
    op = cs.KroneckerOperator(p, ps, pt)
    a = rng.standard_normal((8, 8))
    assert np.allclose(op.forward(a), cs.observe(ps.matrix @ a @ pt.matrix.T, p), atol=1e-12)
    # adjoint identity <Ax, y> = <x, A^T y>
    w = rng.standard_normal(op.out_shape)
    assert np.isclose(np.vdot(op.forward(a), w), np.vdot(a, op.adjoint(w)))


def test_ragged_plan_rejects_duplicates():
    with pytest.raises(ValueError):
        cs.plan_from_deliveries(4, 4, [0], [[1, 1]])
    with pytest.raises(ValueError):
        cs.plan_from_deliveries(4, 4, [0], [[4]])
    with pytest.raises(ValueError):
        cs.plan_from_deliveries(4, 4, [0, 1], [[0]])


def test_full_sampling_recovers_field():
    z = np.random.default_rng(4).standard_normal((16, 8))
    ps, pt = _bases(16, 8)
    p = cs.make_measurement_plan(16, 8, 16, 8, seed=9)
    # the l1 weight floor biases each coefficient by about the floor itself
    z_star, _, rep = cs.reconstruct(cs.observe(z, p), p, ps, pt, cs.SolverConfig(final_factor=1e-8))
    assert np.linalg.norm(z_star - z) / np.linalg.norm(z) <= 1e-6
    assert rep.iterations > 0
    z_def, _, _ = cs.reconstruct(cs.observe(z, p), p, ps, pt)
    assert np.linalg.norm(z_def - z) / np.linalg.norm(z) <= 1e-4


def _planted(n, k, seed):
    rng = np.random.default_rng(seed)
    a = np.zeros(n * n)
    a[rng.choice(n * n, k, replace=False)] = rng.choice([-1, 1], k) * (1 + rng.random(k))
    ps = build_wavelet_basis(n)
    return ps, a.reshape(n, n), ps.matrix @ a.reshape(n, n) @ ps.matrix.T


def test_planted_sparse_recovery_dense():
    ps, _, z = _planted(16, 5, 0)
    p = cs.make_measurement_plan(16, 16, 12, 12, cs.DENSE_UNIFORM, seed=0)
    z_star, _, _ = cs.reconstruct(cs.observe(z, p), p, ps, ps)
    assert cs.mse(z, z_star) <= 1e-4


def test_objective_non_increasing():
    ps, _, z = _planted(16, 6, 7)
    p = cs.make_measurement_plan(16, 16, 10, 10, cs.DENSE_UNIFORM, seed=7)
    _, _, rep = cs.reconstruct(cs.observe(z, p), p, ps, ps, track_objective=True)
    stage = []
    for v in rep.objective + [None]:
        if v is None:
            assert all(b <= a + 1e-12 * max(1.0, abs(a)) for a, b in zip(stage, stage[1:]))
            stage = []
        else:
            stage.append(v)


def test_zero_observation_gives_zero_field():
    ps, pt = _bases(4, 4)
    p = cs.make_measurement_plan(4, 4, 2, 2)
    z_star, a, rep = cs.reconstruct(np.zeros((2, 2)), p, ps, pt)
    assert np.array_equal(z_star, np.zeros((4, 4))) and rep.converged


def test_non_convergence_is_reported():
    ps, _, z = _planted(16, 6, 1)
    p = cs.make_measurement_plan(16, 16, 8, 8, cs.DENSE_UNIFORM, seed=1)
    _, _, rep = cs.reconstruct(cs.observe(z, p), p, ps, ps, cs.SolverConfig(max_iter=2))
    assert rep.converged is False


def test_reconstruct_shape_mismatch():
    ps, pt = _bases(4, 4)
    p = cs.make_measurement_plan(4, 4, 2, 2)
    with pytest.raises(DimensionError):
        cs.reconstruct(np.zeros((3, 2)), p, ps, pt)


def test_mse_examples():
    z = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert cs.mse(z, z) == 0.0
    assert cs.mse(z, np.zeros_like(z)) == 1.0
    assert cs.mse(z, np.array([[1.0, 0.0], [0.0, 0.0]])) == 0.5
    with pytest.raises(ValueError):
        cs.mse(np.zeros((2, 2)), z)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_continuation_weights_decrease(seed):
    top = 1.0 + np.random.default_rng(seed).random() * 100
    w = cs.continuation_weights(top, cs.SolverConfig())
    assert w[0] == pytest.approx(0.1 * top)
    assert w[-1] == pytest.approx(1e-5 * top)
    assert all(b < a for a, b in zip(w, w[1:]))
