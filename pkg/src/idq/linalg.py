"""Dense symmetric eigendecomposition, Toeplitz construction, and the KLT.

Only what the rest of the package needs: covariance matrices here are small
(a few hundred rows at most), so a cyclic Jacobi sweep is plenty and keeps the
whole pipeline free of external solver dependencies.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonConvergence

# Relative off-diagonal mass at which a Jacobi sweep is declared converged.
_JACOBI_RTOL = 1e-12
_MAX_SWEEPS = 100
_EIG_CLAMP = 1e-10  # negative eigenvalues above -1e-10 are PSD rounding noise


@dataclass(frozen=True)
class SymMatrix:
    """Symmetric real matrix, validated to be exactly symmetric as stored."""

    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
        if not np.array_equal(a, a.T):
            raise ValueError("matrix is not exactly symmetric")
        object.__setattr__(self, "a", a)

    @property
    def dim(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class EigenPair:
    """Eigenvalues (descending) and the matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.eigenvalues, dtype=float)
        v = np.asarray(self.eigenvectors, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or w.shape != (v.shape[0],):
            raise DimensionMismatch("eigenvalues/eigenvectors shapes disagree")
        if np.any(np.diff(w) > 0):
            raise ValueError("eigenvalues must be sorted non-increasing")
        gram = v.T @ v
        if np.max(np.abs(gram - np.eye(v.shape[0]))) > 1e-10:
            raise ValueError("eigenvector columns are not orthonormal to 1e-10")
        object.__setattr__(self, "eigenvalues", w)
        object.__setattr__(self, "eigenvectors", v)

    @property
    def dim(self) -> int:
        return self.eigenvectors.shape[0]


def jacobi_eigh(c: SymMatrix) -> EigenPair:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns eigenvalues sorted descending (stable order on ties) with
    column-orthonormal eigenvectors; each eigenvector's first nonzero
    component is made non-negative so outputs are reproducible.  Eigenvalues
    within -1e-10 of zero are clamped to 0 (PSD rounding noise).

    Raises NonConvergence after 100 full sweeps, which no covariance-sized
    input should ever need.
    """
    if c.dim > 4096:
        raise DimensionMismatch("jacobi_eigh supports dimensions up to 4096")
    a = c.a.copy()
    n = c.dim
    v = np.eye(n)
    scale = np.max(np.abs(a))
    if n == 1 or scale == 0.0:
        return _finalize(a.diagonal().copy(), v, c.a, scale)

    target = _JACOBI_RTOL * scale
    skip = target / (2 * n)
    for _ in range(_MAX_SWEEPS):
        off = _max_offdiag(a)
        if off <= target:
            return _finalize(a.diagonal().copy(), v, c.a, scale)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                cth = 1.0 / np.sqrt(1.0 + t * t)
                sth = t * cth
                _rotate(a, v, p, q, cth, sth)
    raise NonConvergence(f"cyclic Jacobi did not converge in {_MAX_SWEEPS} sweeps")


def _rotate(a, v, p, q, c, s):
    # A <- J^T A J for the (p,q) Givens rotation J; columns first, then rows.
    ap = a[:, p].copy()
    aq = a[:, q].copy()
    a[:, p] = c * ap - s * aq
    a[:, q] = s * ap + c * aq
    ap = a[p, :].copy()
    aq = a[q, :].copy()
    a[p, :] = c * ap - s * aq
    a[q, :] = s * ap + c * aq
    a[p, q] = 0.0
    a[q, p] = 0.0
    vp = v[:, p].copy()
    vq = v[:, q].copy()
    v[:, p] = c * vp - s * vq
    v[:, q] = s * vp + c * vq


def _max_offdiag(a):
    mask = ~np.eye(a.shape[0], dtype=bool)
    return np.max(np.abs(a[mask]))


def _finalize(w, v, original, scale):
    w[(w < 0.0) & (w >= -_EIG_CLAMP)] = 0.0
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    # sign convention: first component above noise level is non-negative
    for k in range(v.shape[1]):
        col = v[:, k]
        nz = np.nonzero(np.abs(col) > 1e-12)[0]
        if nz.size and col[nz[0]] < 0:
            v[:, k] = -col
    pair = EigenPair(w, v)
    if scale > 0.0:
        resid = np.max(np.abs((v * w) @ v.T - original))
        if resid > 1e-9 * scale:
            raise NonConvergence("reconstruction residual above tolerance")
    return pair


def toeplitz_covariance(autocov, m: int) -> SymMatrix:
    """Symmetric Toeplitz matrix with entries[i][j] = autocov[|i-j|].

    `autocov` must provide lags 0..m-1 with a positive lag-0 variance.
    """
    r = np.asarray(autocov, dtype=float)
    if m < 1:
        raise ValueError("order must be positive")
    if r.ndim != 1 or r.size < m:
        raise DimensionMismatch(f"need {m} autocovariance lags, got {r.size}")
    if r[0] <= 0:
        raise ValueError("lag-0 autocovariance (variance) must be positive")
    idx = np.abs(np.arange(m)[:, None] - np.arange(m)[None, :])
    return SymMatrix(r[idx])


def klt_forward(basis: EigenPair, x) -> np.ndarray:
    """Transform-domain coefficients A^T x of a data block."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != basis.dim:
        raise DimensionMismatch(f"vector length {x.shape[-1]} != basis dim {basis.dim}")
    return x @ basis.eigenvectors


def klt_inverse(basis: EigenPair, y) -> np.ndarray:
    """Invert klt_forward: reconstruct x = A y."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != basis.dim:
        raise DimensionMismatch(f"vector length {y.shape[-1]} != basis dim {basis.dim}")
    return y @ basis.eigenvectors.T
