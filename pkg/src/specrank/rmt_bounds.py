"""Distributional facts about the scaled noise Gram matrix W = (1/p) N N^T.

Covers the central-limit laws of the diagonal and off-diagonal entries, the
Gumbel laws of their maxima, the Gershgorin-disc upper bound on the largest
eigenvalue, the first two moments of W, and the joint eigenvalue log-density
of the real Wishart ensemble with its Selberg-integral normalization.

All entry-level results are parameterized by the noise variance ``sigma2``
and fourth moment ``gamma4`` of the underlying i.i.d. entries; the Gaussian
case has gamma4 = 3 sigma2^2. For n >= p the same formulas apply to
(1/n) N^T N with the roles of n and p swapped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DegenerateScale, DomainError

NEG_INF = float("-inf")


@dataclass(frozen=True)
class EntryMoments:
    """Second and fourth moments of the noise entries plus matrix shape."""

    sigma2: float
    gamma4: float
    n: int
    p: int

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise DomainError(f"sigma2 must be positive, got {self.sigma2}")
        if self.gamma4 < self.sigma2 ** 2:
            raise DomainError("gamma4 must be >= sigma2^2 (Jensen)")
        if self.n < 2 or self.p < 2:
            raise DomainError("n and p must both be >= 2")


def gaussian_moments(n: int, p: int, sigma2: float = 1.0) -> EntryMoments:
    """EntryMoments for Gaussian noise: gamma4 = 3 sigma2^2."""
    return EntryMoments(sigma2=sigma2, gamma4=3.0 * sigma2 ** 2, n=n, p=p)


@dataclass(frozen=True)
class GevParams:
    """Gumbel (GEV shape 0) location/scale pair."""

    location: float
    scale: float
    shape: float = 0.0

    def __post_init__(self):
        if self.scale <= 0:
            raise DegenerateScale(f"scale must be positive, got {self.scale}")
        if self.shape != 0.0:
            raise DomainError("only the Gumbel family (shape = 0) is supported")

    def cdf(self, x) -> float:
        return np.exp(-np.exp(-(np.asarray(x) - self.location) / self.scale))

    def quantile(self, q: float) -> float:
        if not 0.0 < q < 1.0:
            raise DomainError(f"quantile level must be in (0, 1), got {q}")
        return self.location - self.scale * math.log(-math.log(q))


@dataclass(frozen=True)
class NoiseBound:
    """Gumbel laws for the max diagonal and max Gershgorin radius of W.

    ``lambda_max_bound`` combines the two quantiles at ``confidence``;
    ``convergence_rate`` records the sqrt((n-1)/p) rate of the radius term.
    """

    diag_max: GevParams
    radius_max: GevParams
    confidence: float
    lambda_max_bound: float
    convergence_rate: float


def diag_entry_dist(m: EntryMoments) -> tuple[float, float]:
    """(mean, variance) of a diagonal entry of W: (sigma2, (gamma4 - sigma2^2)/p)."""
    return (m.sigma2, (m.gamma4 - m.sigma2 ** 2) / m.p)


def offdiag_entry_dist(m: EntryMoments) -> tuple[float, float]:
    """(mean, variance) of an off-diagonal entry of W: (0, (gamma4 + sigma2^2)/(4p))."""
    return (0.0, (m.gamma4 + m.sigma2 ** 2) / (4.0 * m.p))


def gev_max_diag(m: EntryMoments) -> GevParams:
    """Gumbel law of the maximum diagonal entry of W.

    Location sigma2 and scale sqrt((gamma4 - sigma2^2)/p), with no
    sample-size-dependent centering.
    """
    var = (m.gamma4 - m.sigma2 ** 2) / m.p
    if var <= 0:
        raise DegenerateScale("gamma4 equals sigma2^2; the diagonal maximum is degenerate")
    return GevParams(location=m.sigma2, scale=math.sqrt(var))


def gev_max_radius(m: EntryMoments) -> GevParams:
    """Gumbel law of the maximum Gershgorin radius (column sum of |off-diag|).

    The summands are half-normal, so the radius over n-1 entries has mean
    sqrt((n-1)^2 (gamma4 + sigma2^2) / (2 p pi)) and variance
    (n-1)(pi - 2)(gamma4 + sigma2^2) / (4 p pi).
    """
    s = m.gamma4 + m.sigma2 ** 2
    mu = math.sqrt((m.n - 1) ** 2 * s / (2.0 * m.p * math.pi))
    var = (m.n - 1) * (math.pi - 2.0) * s / (4.0 * m.p * math.pi)
    return GevParams(location=mu, scale=math.sqrt(var))


def gershgorin_upper(m: EntryMoments, confidence: float) -> NoiseBound:
    """Upper bound on the largest eigenvalue of W at the given confidence.

    Sums the Gumbel quantiles of the max diagonal entry and the max
    Gershgorin radius.
    """
    if not 0.0 < confidence < 1.0:
        raise DomainError(f"confidence must be in (0, 1), got {confidence}")
    diag = gev_max_diag(m)
    radius = gev_max_radius(m)
    bound = diag.quantile(confidence) + radius.quantile(confidence)
    return NoiseBound(
        diag_max=diag,
        radius_max=radius,
        confidence=confidence,
        lambda_max_bound=bound,
        convergence_rate=math.sqrt((m.n - 1) / m.p),
    )


def exceedance_inequality(a: float) -> tuple[float, float]:
    """(exact, bound) pair exp(-exp(-a)) <= exp(exp(-2a)) - exp(-a)."""
    if not math.isfinite(a):
        raise DomainError("a must be finite")
    exact = math.exp(-math.exp(-a))
    e2 = math.exp(-2.0 * a)
    bound = (math.exp(e2) if e2 < 700 else math.inf) - math.exp(-a)
    return (exact, bound)


def wp_expected_moments(n: int, p: int) -> tuple[float, float]:
    """Diagonal values of E[W] and E[W^2] for standardized entries: (1, 1 + (n+1)/p)."""
    if n < 1 or p < 1:
        raise DomainError("n and p must be >= 1")
    return (1.0, 1.0 + (n + 1) / p)


def _log_selberg_norm(n: int, p: int) -> float:
    """log of the Selberg normalization constant at beta = 1.

    log Z = (n p / 2) log(1/2) + sum_j [log G(3/2) - log G(j/2 + 1)
    - log G((p - n + j)/2)].
    """
    j = np.arange(1, n + 1, dtype=np.float64)
    return float(
        -0.5 * n * p * math.log(2.0)
        + np.sum(gammaln(1.5) - gammaln(j / 2.0 + 1.0) - gammaln((p - n + j) / 2.0))
    )


def wishart_log_density(eigs, n: int, p: int) -> float:
    """Log joint density of the n eigenvalues of a real Wishart matrix N N^T.

    ``eigs`` are the eigenvalues (any order; the density is exchangeable),
    N is n x p standard normal with n <= p. Duplicate or non-positive
    eigenvalues sit outside the support and return -inf.
    """
    lam = np.asarray(eigs, dtype=np.float64)
    if lam.ndim != 1 or lam.size != n:
        raise DomainError(f"expected {n} eigenvalues, got shape {lam.shape}")
    if n > p:
        raise DomainError(f"requires n <= p, got n={n}, p={p}")
    if np.any(lam <= 0):
        return NEG_INF
    if lam.size > 1:
        diffs = np.abs(lam[:, None] - lam[None, :])[np.triu_indices(n, k=1)]
        if np.any(diffs == 0.0):
            return NEG_INF
        log_vandermonde = float(np.sum(np.log(diffs)))
    else:
        log_vandermonde = 0.0
    return (
        _log_selberg_norm(n, p)
        - 0.5 * float(lam.sum())
        + 0.5 * (p - n - 1) * float(np.sum(np.log(lam)))
        + log_vandermonde
    )
