"""Univariate Bayesian change-point analysis (product-partition model).

``bcp_posterior`` runs a Gibbs sampler over change indicators with conjugate
normal block means; each position's posterior change probability is its
post-burn-in indicator frequency. ``exact_posterior_small`` sums the same
posterior over every partition of a short series and acts as the sampler's
verification oracle. ``double_posterior`` reruns the analysis on a posterior
probability sequence itself.

The per-position prior change probabilities are supplied by the caller; the
signal-to-noise hyperparameter w is integrated over Uniform(0, w0] with
w0 = 0.2 by default. A change at position i means element i starts a new
block; position 0 is pinned to probability 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, betaln

from ._bcp_kernel import gibbs_change_points
from .errors import DomainError, PriorLengthMismatch, SeriesTooLong, SeriesTooShort

#: upper end of the uniform prior on the signal-to-noise ratio w
DEFAULT_W0 = 0.2

#: default sweep counts (oracle comparisons use more)
DEFAULT_SWEEPS = 500
DEFAULT_BURNIN = 50

#: relative floor on the within-block sum of squares
_W_FLOOR_REL = 1e-12

_MAX_EXACT_LENGTH = 14


@dataclass(frozen=True)
class PosteriorTrace:
    """Per-position posterior change probabilities for one analyzed series."""

    series: np.ndarray
    prior: np.ndarray
    probs: np.ndarray
    posterior_means: np.ndarray
    sweeps: int
    burnin: int
    seed: int | None = None

    def __post_init__(self):
        series = np.asarray(self.series, dtype=np.float64)
        prior = np.asarray(self.prior, dtype=np.float64)
        probs = np.asarray(self.probs, dtype=np.float64)
        means = np.asarray(self.posterior_means, dtype=np.float64)
        if not (series.size == prior.size == probs.size == means.size):
            raise ValueError("series, prior, probs, posterior_means must share a length")
        if probs[0] != 0.0:
            raise ValueError("probs[0] must be pinned to 0")
        if np.any(probs < 0.0) or np.any(probs > 1.0):
            raise ValueError("probs must lie in [0, 1]")
        for name, arr in (("series", series), ("prior", prior),
                          ("probs", probs), ("posterior_means", means)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def _validate_inputs(series, prior):
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1:
        raise DomainError("series must be one-dimensional")
    if x.size < 3:
        raise SeriesTooShort(f"need at least 3 elements, got {x.size}")
    pr = np.asarray(prior, dtype=np.float64)
    if pr.shape != x.shape:
        raise PriorLengthMismatch(f"prior length {pr.size} != series length {x.size}")
    if np.any(pr < 0.0) or np.any(pr >= 1.0):
        raise DomainError("prior entries must lie in [0, 1)")
    if not np.all(np.isfinite(x)):
        raise DomainError("series entries must be finite")
    return x, pr


def _as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng, None
    seed = int(rng)
    return np.random.default_rng(seed), seed


def _logit_prior(prior: np.ndarray) -> np.ndarray:
    out = np.empty_like(prior)
    zero = prior == 0.0
    out[zero] = -1e30
    out[~zero] = np.log(prior[~zero]) - np.log1p(-prior[~zero])
    return out


def bcp_posterior(series, prior, sweeps: int = DEFAULT_SWEEPS,
                  burnin: int = DEFAULT_BURNIN, rng=0,
                  w0: float = DEFAULT_W0) -> PosteriorTrace:
    """Posterior change probabilities from the partial-sums Gibbs sampler.

    ``rng`` is an integer seed or a ``numpy.random.Generator``; a fixed seed
    makes the trace fully reproducible.
    """
    x, pr = _validate_inputs(series, prior)
    if sweeps < 1 or burnin < 0:
        raise DomainError("sweeps must be >= 1 and burnin >= 0")
    gen, seed = _as_generator(rng)
    m = x.size
    xc = x - x.mean()
    tot_ss = float(xc @ xc)
    w_floor = max(tot_ss * _W_FLOOR_REL, 1e-300)
    u01 = gen.random((sweeps + burnin, m - 1))
    probs, fit = gibbs_change_points(xc, x, _logit_prior(pr), sweeps, burnin,
                                     u01, w0, w_floor)
    return PosteriorTrace(series=x, prior=pr, probs=probs, posterior_means=fit,
                          sweeps=sweeps, burnin=burnin, seed=seed)


def double_posterior(trace: PosteriorTrace, sweeps: int = DEFAULT_SWEEPS,
                     burnin: int = DEFAULT_BURNIN, rng=0,
                     w0: float = DEFAULT_W0) -> PosteriorTrace:
    """Second-pass analysis: the BCP run on the first pass's probabilities."""
    return bcp_posterior(trace.probs, trace.prior, sweeps=sweeps, burnin=burnin,
                         rng=rng, w0=w0)


# ---------------------------------------------------------------------------
# exact enumeration oracle
# ---------------------------------------------------------------------------

def _log_w_integral_exact(q: float, w_ss: float, b_ss: float, c: float,
                          w0: float) -> float:
    """Reference evaluation of log int_0^w0 w^q (W + wB)^(-c) dw via scipy."""
    if b_ss * w0 <= w_ss * 1e-14:
        return -c * math.log(w_ss) + (q + 1.0) * math.log(w0) - math.log(q + 1.0)
    a = q + 1.0
    bb = c - q - 1.0
    denom = w_ss + w0 * b_ss
    x0 = w0 * b_ss / denom
    if bb > 1e-12:
        reg = betainc(a, bb, x0)
        if 0.0 < reg < 1.0:
            return (float(np.log(reg) + betaln(a, bb))
                    + (a - c) * math.log(w_ss) - a * math.log(b_ss))
    # corner cases: log-domain composite quadrature on t = log(w)
    t_hi = math.log(w0)
    s_hi = b_ss * w0 / denom
    if (q + 1.0) - c * s_hi >= 0.0:
        t_mode = t_hi
    else:
        t_mode = min(math.log(w_ss * (q + 1.0) / (b_ss * (c - q - 1.0))), t_hi)

    def h(t):
        return (q + 1.0) * t - c * np.log(w_ss + b_ss * np.exp(t))

    h_mode = float(h(t_mode))
    step = 1.0
    t_lo = t_mode - step
    for _ in range(80):
        if float(h(t_lo)) <= h_mode - 46.0:
            break
        step *= 2.0
        t_lo = t_mode - step
    npan = max(8, int(t_hi - t_lo) + 1)
    edges = np.linspace(t_lo, t_hi, npan + 1)
    nodes, weights = np.polynomial.legendre.leggauss(24)
    mids = (edges[1:] + edges[:-1]) / 2.0
    halves = np.diff(edges) / 2.0
    tt = (mids[:, None] + halves[:, None] * nodes[None, :]).ravel()
    ww = (halves[:, None] * weights[None, :]).ravel()
    hh = h(tt)
    hmax = hh.max()
    return float(hmax + np.log(np.sum(ww * np.exp(hh - hmax))))


def exact_posterior_small(series, prior, w0: float = DEFAULT_W0) -> PosteriorTrace:
    """Exact posterior change probabilities by summing over all partitions.

    Enumerates the 2^(m-1) indicator vectors of a length-m series, so m is
    capped at 14. Serves as the brute-force oracle for ``bcp_posterior``.
    """
    x, pr = _validate_inputs(series, prior)
    m = x.size
    if m > _MAX_EXACT_LENGTH:
        raise SeriesTooLong(f"exact enumeration is capped at length {_MAX_EXACT_LENGTH}")
    xc = x - x.mean()
    tot_ss = float(xc @ xc)
    w_floor = max(tot_ss * _W_FLOOR_REL, 1e-300)
    c = 0.5 * (m - 1.0)
    s1 = np.concatenate([[0.0], np.cumsum(xc)])
    s2 = np.concatenate([[0.0], np.cumsum(xc * xc)])
    o1 = np.concatenate([[0.0], np.cumsum(x)])

    n_masks = 1 << (m - 1)
    log_post = np.full(n_masks, -np.inf)
    block_means = np.zeros((n_masks, m))
    log_p = np.log(np.where(pr[1:] > 0.0, pr[1:], 1.0))
    log_q = np.log1p(-pr[1:])

    for mask in range(n_masks):
        lp = 0.0
        impossible = False
        for i in range(m - 1):
            if mask >> i & 1:
                if pr[i + 1] == 0.0:
                    impossible = True
                    break
                lp += log_p[i]
            else:
                lp += log_q[i]
        if impossible:
            continue
        splits = [0] + [i + 1 for i in range(m - 1) if mask >> i & 1] + [m]
        w_ss = 0.0
        b_ss = 0.0
        for a, b in zip(splits[:-1], splits[1:]):
            t1 = s1[b] - s1[a]
            w_ss += max((s2[b] - s2[a]) - t1 * t1 / (b - a), 0.0)
            b_ss += t1 * t1 / (b - a)
            block_means[mask, a:b] = (o1[b] - o1[a]) / (b - a)
        nb = len(splits) - 1
        log_post[mask] = lp + _log_w_integral_exact(
            0.5 * (nb - 1), w_ss + w_floor, b_ss, c, w0)

    log_z = float(np.logaddexp.reduce(log_post))
    weights = np.exp(log_post - log_z)
    probs = np.zeros(m)
    for i in range(m - 1):
        sel = (np.arange(n_masks) >> i & 1).astype(bool)
        probs[i + 1] = weights[sel].sum()
    means = weights @ block_means
    return PosteriorTrace(series=x, prior=pr, probs=probs, posterior_means=means,
                          sweeps=0, burnin=0, seed=None)
