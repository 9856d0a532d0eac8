import numpy as np
import pytest

from idq.errors import DimensionMismatch
from idq.linalg import (
    EigenPair,
    SymMatrix,
    jacobi_eigh,
    klt_forward,
    klt_inverse,
    toeplitz_covariance,
)
from idq.sources import GaussMarkov, psd_gauss_markov, sample_block


def test_symmatrix_rejects_asymmetry():
    with pytest.raises(ValueError):
        SymMatrix(np.array([[1.0, 0.1], [0.2, 1.0]]))
    with pytest.raises(DimensionMismatch):
        SymMatrix(np.zeros((2, 3)))


def test_jacobi_identity():
    pair = jacobi_eigh(SymMatrix(np.eye(2)))
    assert np.allclose(pair.eigenvalues, [1.0, 1.0])
    assert np.allclose(pair.eigenvectors, np.eye(2))


def test_jacobi_correlated_pair():
    # roots of lambda^2 - 2 lambda + (1 - 0.49)
    pair = jacobi_eigh(SymMatrix(np.array([[1.0, 0.7], [0.7, 1.0]])))
    assert np.allclose(pair.eigenvalues, [1.7, 0.3], atol=1e-12)


def test_jacobi_diagonal_descending():
    pair = jacobi_eigh(SymMatrix(np.diag([2.0, 5.0])))
    assert pair.eigenvalues.tolist() == [5.0, 2.0]


def test_jacobi_matches_numpy_on_random_symmetric():
    rng = np.random.default_rng(7)
    for n in (3, 6, 12, 25):
        b = rng.standard_normal((n, n))
        m = (b + b.T) / 2.0
        pair = jacobi_eigh(SymMatrix(m))
        ref = np.sort(np.linalg.eigvalsh(m))[::-1]
        assert np.allclose(pair.eigenvalues, ref, atol=1e-9 * max(1.0, np.abs(m).max()))
        v = pair.eigenvectors
        assert np.max(np.abs(v.T @ v - np.eye(n))) <= 1e-9
        recon = (v * pair.eigenvalues) @ v.T
        assert np.max(np.abs(recon - m)) <= 1e-9 * np.abs(m).max()


def test_jacobi_clamps_psd_noise():
    # rank-deficient PSD matrix: one eigenvalue is exactly zero up to rounding
    u = np.array([[1.0, 2.0], [2.0, 4.0]])
    pair = jacobi_eigh(SymMatrix(u))
    assert pair.eigenvalues[-1] >= 0.0


def test_eigenpair_validation():
    with pytest.raises(ValueError):
        EigenPair(np.array([1.0, 2.0]), np.eye(2))  # ascending
    with pytest.raises(ValueError):
        EigenPair(np.array([1.0, 1.0]), np.array([[1.0, 1.0], [0.0, 0.0]]))


def test_toeplitz_examples():
    assert toeplitz_covariance([1.0], 1).a.tolist() == [[1.0]]
    t = toeplitz_covariance([1.0, 0.5, 0.25], 3).a
    assert t.tolist() == [[1, 0.5, 0.25], [0.5, 1, 0.5], [0.25, 0.5, 1]]
    assert np.array_equal(toeplitz_covariance([1.0, 0.0, 0.0], 3).a, np.eye(3))
    with pytest.raises(ValueError):
        toeplitz_covariance([0.0, 0.1], 2)


def test_klt_identity_and_sign_convention():
    basis = jacobi_eigh(SymMatrix(np.eye(2)))
    assert np.allclose(klt_forward(basis, np.array([3.0, -1.0])), [3.0, -1.0])
    basis = jacobi_eigh(SymMatrix(np.array([[1.0, 0.7], [0.7, 1.0]])))
    y = klt_forward(basis, np.array([1.0, 1.0]))
    assert abs(y[0] - np.sqrt(2.0)) <= 1e-12  # first component made non-negative
    assert abs(y[1]) <= 1e-12


def test_klt_round_trip_and_distance_preservation():
    rng = np.random.default_rng(11)
    b = rng.standard_normal((6, 6))
    basis = jacobi_eigh(SymMatrix(b @ b.T))
    x = rng.standard_normal((1000, 6))
    y = rng.standard_normal((1000, 6))
    assert np.max(np.abs(klt_inverse(basis, klt_forward(basis, x)) - x)) <= 1e-10
    d0 = ((x - y) ** 2).sum(axis=1)
    d1 = ((klt_forward(basis, x) - klt_forward(basis, y)) ** 2).sum(axis=1)
    assert np.all(np.abs(d0 - d1) <= 1e-9 * d0)


def test_klt_dimension_mismatch():
    basis = jacobi_eigh(SymMatrix(np.eye(3)))
    with pytest.raises(DimensionMismatch):
        klt_forward(basis, np.zeros(4))


def test_klt_decorrelates_ar1_blocks():
    m = 4
    cov = toeplitz_covariance(0.7 ** np.arange(m), m)
    basis = jacobi_eigh(cov)
    blocks = sample_block(GaussMarkov(1.0, 0.7), m, 100_000, 2024)
    coeff = klt_forward(basis, blocks)
    emp = np.cov(coeff.T)
    off = emp - np.diag(np.diag(emp))
    assert np.max(np.abs(off)) <= 0.02


def test_toeplitz_eigenvalues_bounded_by_psd_range():
    rho = 0.6
    cov = toeplitz_covariance(rho ** np.arange(64), 64)
    w = jacobi_eigh(cov).eigenvalues
    lo = psd_gauss_markov(rho, np.pi)
    hi = psd_gauss_markov(rho, 0.0)
    assert w.min() >= lo - 1e-9
    assert w.max() <= hi + 1e-9
