"""Orthonormal wavelet bases and the separable 2D analysis/synthesis pair."""
from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class WaveletBasis:
    """Orthonormal basis; columns of `matrix` are the basis vectors."""
    dimension: int
    kind: str
    matrix: np.ndarray


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


def haar_matrix(n):
    """Recursive orthonormal Haar analysis matrix (rows are Haar functions)."""
    h = np.array([[1.0]])
    while h.shape[0] < n:
        m = h.shape[0]
        top = np.kron(h, [1.0, 1.0])
        bottom = np.kron(np.eye(m), [1.0, -1.0])
        h = np.vstack([top, bottom]) / np.sqrt(2.0)
    return h


def build_wavelet_basis(dimension, kind="haar"):
    if kind == "identity":
        if dimension < 1:
            raise DimensionError(f"dimension must be positive, got {dimension}")
        return WaveletBasis(dimension, kind, np.eye(dimension))
    if kind != "haar":
        raise ValueError(f"unknown basis kind {kind!r}")
    if dimension < 2 or not _is_pow2(dimension):
        raise DimensionError(f"Haar basis needs a power-of-two dimension >= 2, got {dimension}")
    return WaveletBasis(dimension, kind, haar_matrix(dimension).T.copy())


def _check(shape, psi_s, psi_t):
    if shape != (psi_s.dimension, psi_t.dimension):
        raise DimensionError(f"field {shape} does not match bases ({psi_s.dimension}, {psi_t.dimension})")


def analyze(z, psi_s, psi_t):
    """Coefficients A with Z = Psi_S A Psi_T^T."""
    z = np.asarray(z, dtype=float)
    _check(z.shape, psi_s, psi_t)
    return psi_s.matrix.T @ z @ psi_t.matrix


def synthesize(a, psi_s, psi_t):
    a = np.asarray(a, dtype=float)
    _check(a.shape, psi_s, psi_t)
    return psi_s.matrix @ a @ psi_t.matrix.T


def sparsity_estimate(a, rel_threshold=1e-3):
    """Count of coefficients above rel_threshold times the largest magnitude."""
    a = np.abs(np.asarray(a))
    top = a.max() if a.size else 0.0
    if top == 0:
        return 0
    return int(np.count_nonzero(a > rel_threshold * top))
