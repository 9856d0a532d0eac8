"""Identification rate-similarity computations.

All rates are in bits per sample (log base 2, fixed project-wide).  An
unachievable similarity threshold yields the rate ``math.inf``; CSV output
serializes it as the literal string ``inf``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, TauOutOfRange, UnsupportedModel
from .sources import (
    GaussMarkov,
    IidGaussian,
    MultivariateGaussian,
    SourceModel,
    SpectralGrid,
)

#: Monotonicity tags a Curve may carry.
RATE_NONDECREASING = "rate_nondecreasing_in_d_id"
RATE_NONINCREASING = "rate_nonincreasing_in_d_id"

_MONO_SLACK = 1e-9


@dataclass(frozen=True)
class RateSimilarityPoint:
    """One (similarity threshold, rate) pair; rate may be math.inf."""

    d_id: float
    rate: float

    def __post_init__(self):
        if self.d_id < 0:
            raise ValueError("similarity threshold must be non-negative")
        if not (self.rate >= 0):  # also rejects NaN
            raise ValueError("rate must be non-negative or infinite")

    @property
    def finite(self) -> bool:
        return math.isfinite(self.rate)


@dataclass(frozen=True)
class WaterLevel:
    """Positive water level; the upper bound is checked against each source."""

    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("water level must be positive")


def _tau_value(tau) -> float:
    t = tau.tau if isinstance(tau, WaterLevel) else float(tau)
    if not t > 0:
        raise TauOutOfRange("water level must be positive")
    return t


@dataclass(frozen=True)
class Curve:
    """Rate-similarity points sorted by strictly increasing d_id."""

    points: tuple
    label: str
    monotonicity: str = RATE_NONDECREASING

    def __post_init__(self):
        pts = tuple(self.points)
        d = np.array([p.d_id for p in pts])
        r = np.array([p.rate for p in pts])
        if np.any(np.diff(d) <= 0):
            raise ValueError("d_id must be strictly increasing along the curve")
        dr = np.diff(r)
        if self.monotonicity == RATE_NONDECREASING and np.any(dr < -_MONO_SLACK):
            raise ValueError("rate decreased along increasing d_id beyond slack")
        if self.monotonicity == RATE_NONINCREASING and np.any(dr > _MONO_SLACK):
            raise ValueError("rate increased along increasing d_id beyond slack")
        object.__setattr__(self, "points", pts)

    @property
    def d_ids(self) -> np.ndarray:
        return np.array([p.d_id for p in self.points])

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate for p in self.points])


def curve_from_arrays(d, r, label, monotonicity=RATE_NONDECREASING) -> Curve:
    """Sort by d_id, drop duplicate thresholds, and build a validated Curve."""
    d = np.asarray(d, dtype=float)
    r = np.asarray(r, dtype=float)
    order = np.argsort(d, kind="stable")
    d, r = d[order], r[order]
    keep = np.concatenate([[True], np.diff(d) > 0])
    pts = [RateSimilarityPoint(float(a), float(b)) for a, b in zip(d[keep], r[keep])]
    return Curve(tuple(pts), label, monotonicity)


def id_rate_iid(variance: float, d_id: float) -> float:
    """Identification rate of an i.i.d. Gaussian source at threshold d_id.

    log2(2 sigma^2 / (2 sigma^2 - d_id)) below the 2 sigma^2 limit, infinite at
    or above it.
    """
    if variance <= 0:
        raise ValueError("variance must be positive")
    if d_id < 0:
        raise ValueError("d_id must be non-negative")
    lim = 2.0 * variance
    if d_id >= lim:
        return math.inf
    return math.log2(lim / (lim - d_id))


def water_filling_allocation(eigenvalues, tau) -> np.ndarray:
    """Per-component similarity shares max(0, 2(xi - tau)) for a water level."""
    xi = np.asarray(eigenvalues, dtype=float)
    t = _tau_value(tau)
    if xi.ndim != 1 or xi.size == 0:
        raise ValueError("need a non-empty eigenvalue list")
    if np.any(xi < 0):
        raise ValueError("eigenvalues must be non-negative")
    if t > xi.max() * (1.0 + 1e-12):
        raise TauOutOfRange(f"tau {t} above the largest component variance {xi.max()}")
    return np.maximum(0.0, 2.0 * (xi - t))


def id_point_multivariate(eigenvalues, tau) -> RateSimilarityPoint:
    """Reverse water-filling point for a multivariate Gaussian block.

    rate = (1/M) sum max(0, log2(xi/tau)), d_id = (1/M) sum max(0, 2(xi - tau)).
    """
    xi = np.asarray(eigenvalues, dtype=float)
    alloc = water_filling_allocation(xi, tau)  # validates tau and eigenvalues
    t = _tau_value(tau)
    active = xi > t
    rate = float(np.log2(xi[active] / t).sum()) / xi.size
    d_id = float(alloc.sum()) / xi.size
    return RateSimilarityPoint(max(d_id, 0.0), max(rate, 0.0))


def default_tau_grid(xi_max: float, n_points: int = 200, tau_min: float = None) -> np.ndarray:
    """Log-spaced water levels in [xi_max * 1e-4, xi_max] (ascending)."""
    if xi_max <= 0:
        raise ValueError("largest component variance must be positive")
    lo = xi_max * 1e-4 if tau_min is None else tau_min
    if not 0 < lo <= xi_max:
        raise TauOutOfRange("tau_min must lie in (0, xi_max]")
    return np.geomspace(lo, xi_max, n_points)


def id_curve_multivariate(eigenvalues, tau_grid, label="mv-gaussian") -> Curve:
    """Sweep the water level over a sorted grid and collect the rate curve."""
    taus = np.asarray(tau_grid, dtype=float)
    if np.any(np.diff(taus) <= 0):
        raise TauOutOfRange("tau grid must be sorted strictly ascending")
    pts = [id_point_multivariate(eigenvalues, t) for t in taus[::-1]]
    return curve_from_arrays(
        [p.d_id for p in pts], [p.rate for p in pts], label, RATE_NONDECREASING
    )


def id_point_spectral(psd: SpectralGrid, tau) -> RateSimilarityPoint:
    """Water-filling point against a sampled PSD (midpoint Riemann sums).

    rate = (1/2pi) int max(0, log2(Phi/tau)), d_id = (1/2pi) int max(0, 2(Phi-tau)).
    """
    t = _tau_value(tau)
    phi = psd.values
    if t > phi.max() * (1.0 + 1e-12):
        raise TauOutOfRange(f"tau {t} above the PSD maximum {phi.max()}")
    active = phi > t
    rate = float(np.log2(phi[active] / t).sum()) / phi.size
    d_id = 2.0 * float((phi[active] - t).sum()) / phi.size
    return RateSimilarityPoint(max(d_id, 0.0), max(rate, 0.0))


def id_curve_spectral(psd: SpectralGrid, tau_grid, label="spectral") -> Curve:
    taus = np.asarray(tau_grid, dtype=float)
    if np.any(np.diff(taus) <= 0):
        raise TauOutOfRange("tau grid must be sorted strictly ascending")
    pts = [id_point_spectral(psd, t) for t in taus[::-1]]
    return curve_from_arrays(
        [p.d_id for p in pts], [p.rate for p in pts], label, RATE_NONDECREASING
    )


def similarity_limit(model: SourceModel) -> float:
    """Threshold beyond which query and database are inherently similar.

    2 sigma^2 for scalar Gaussians, twice the average covariance trace for
    multivariate blocks.
    """
    if isinstance(model, IidGaussian):
        return 2.0 * model.variance
    if isinstance(model, GaussMarkov):
        return 2.0 * model.variance
    if isinstance(model, MultivariateGaussian):
        return 2.0 * float(np.trace(model.covariance.a)) / model.dim
    raise UnsupportedModel(f"similarity limit undefined for {type(model).__name__}")


def lc_delta_rate(variance: float, d_id: float) -> float:
    """Minimum rate of the lossy-compression triangle scheme for a Gaussian source.

    0.5 * log2(1 / (1 - sqrt(2u - u^2))) with u = d_id / (2 sigma^2); infinite
    for u >= 1.
    """
    if variance <= 0:
        raise ValueError("variance must be positive")
    if d_id < 0:
        raise ValueError("d_id must be non-negative")
    u = d_id / (2.0 * variance)
    if u >= 1.0:
        return math.inf
    root = math.sqrt(max(2.0 * u - u * u, 0.0))
    if root >= 1.0:
        return math.inf
    return 0.5 * math.log2(1.0 / (1.0 - root))


def binary_entropy(q: float) -> float:
    """Binary entropy in bits, with h(0) = h(1) = 0."""
    if not 0.0 <= q <= 1.0:
        raise DomainError("entropy argument must lie in [0, 1]")
    if q in (0.0, 1.0):
        return 0.0
    return -(q * math.log2(q) + (1.0 - q) * math.log2(1.0 - q))


def binary_hamming_tc_oracle(d_id: float) -> float:
    """Closed-form TC-triangle rate for Bern(1/2) with Hamming distance.

    1 - h2(1/2 - d_id): the symmetric-channel restriction of the type-covering
    bound, cross-checked against the exhaustive channel search in the tests.
    """
    if not 0.0 <= d_id <= 0.5:
        raise DomainError("binary-Hamming threshold must lie in [0, 1/2]")
    return 1.0 - binary_entropy(0.5 - d_id)
