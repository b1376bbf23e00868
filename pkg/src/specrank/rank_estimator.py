"""End-to-end detectable-rank estimation.

Pipeline: scaled spectrum -> corrected-variance MP noise samples ->
deviation sequence -> change-point posterior -> edge-alarm trimming ->
double posterior -> delta-rule selection of the rank K.

Conventions: the deviation sequence holds dimensions 1..n' at indices
0..n'-1; a change point at index i (element i starts a new block) means
dimensions 1..i carry signal, so k = i. The double posterior flags the
position where the noise block starts, so its argmax positions nominate
dimension j - 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import mp_law, spectra
from .changepoint import PosteriorTrace, bcp_posterior, double_posterior
from .errors import DegenerateSpectrum
from .matrix_io import DataMatrix, as_centered
from .rmt_bounds import EntryMoments, gershgorin_upper

_ARGMAX_TOL = 1e-12


@dataclass(frozen=True)
class RankConfig:
    """Tunable knobs of the rank estimation pipeline."""

    n_prime: int | None = None
    delta: float = 0.90
    confidence: float = 0.99
    sweeps: int = 500
    burnin: int = 50
    seed: int = 0
    prior_start: float = 0.9
    gamma4: float | None = None  # noise fourth moment; None = Gaussian 3 sigma^4
    w0: float = 0.2
    trim_eps: float = 0.05
    trim_spike: float = 0.5
    eig_tol: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError(f"confidence must lie in (0, 1), got {self.confidence}")
        if not 0.0 <= self.prior_start < 1.0:
            raise ValueError(f"prior_start must lie in [0, 1), got {self.prior_start}")


@dataclass(frozen=True)
class RankDecision:
    """Estimated rank plus every intermediate the decision was based on."""

    k: int
    candidates: tuple[int, ...]
    deviation: np.ndarray
    first_trace: PosteriorTrace | None
    second_trace: PosteriorTrace | None
    trimmed_range: tuple[int, int]
    sigma2_used: float | None
    mp_samples: np.ndarray
    spectrum: spectra.SpectrumEstimate
    warnings: tuple[str, ...] = field(default=())


def linear_prior(length: int, start: float = 0.9) -> np.ndarray:
    """Decreasing linear prior from ``start`` to 0; position 0 pinned to 0."""
    if length == 1:
        return np.zeros(1)
    prior = start * (1.0 - np.arange(length) / (length - 1))
    prior[0] = 0.0
    return prior


def trim_alarm(probs, eps: float = 0.05, min_run: int | None = None,
               spike: float = 0.5) -> tuple[int, int]:
    """Index interval retained for selection after the flat/spike alarm.

    A run of at least ``min_run`` consecutive probabilities below ``eps``
    followed only by tail positions at or above ``spike`` (or by nothing)
    truncates the interval at the start of the run. All-flat input collapses
    to [0, 1), which forces the k = 0 path.
    """
    probs = np.asarray(probs, dtype=np.float64)
    m = probs.size
    if m < 3:
        return (0, m)
    run_len = min_run if min_run is not None else max(5, math.ceil(0.2 * m))
    flat = probs < eps
    if np.all(flat[1:]):
        return (0, 1)
    i = 1
    while i < m:
        if flat[i]:
            j = i
            while j < m and flat[j]:
                j += 1
            if j - i >= run_len and np.all(probs[j:] >= spike):
                return (0, max(i, 1))
            i = j
        else:
            i += 1
    return (0, m)


def select_k(first: PosteriorTrace, second: PosteriorTrace, delta: float,
             trimmed: tuple[int, int]) -> tuple[int, tuple[int, ...]]:
    """Pick k from the double-posterior candidates and the delta rule.

    Candidate dimensions are the positions where the double posterior
    approximates its maximum (within the same ``delta`` factor, which absorbs
    Monte Carlo noise in the frequencies), shifted down by one: a second-pass
    change at j marks element j as the first noise dimension, nominating
    dimension j - 1. Among candidates whose first-pass posterior reaches
    ``delta`` times the trimmed maximum the largest wins; with no qualifying
    candidate the delta rule runs over the whole trimmed range.
    """
    a, b = trimmed
    first_probs = np.asarray(first.probs)
    second_probs = np.asarray(second.probs)
    b = min(b, first_probs.size)
    window = slice(a, b)
    fmax = float(first_probs[window].max())
    threshold = delta * fmax
    smax = float(second_probs[window].max())
    raw = np.flatnonzero(second_probs[window] >= delta * smax - _ARGMAX_TOL) + a
    candidates = sorted({max(int(j) - 1, 0) for j in raw})
    qualified = [k for k in candidates if a <= k < b and first_probs[k] >= threshold]
    if qualified:
        k = max(qualified)
    else:
        passing = np.flatnonzero(first_probs[window] >= threshold) + a
        k = int(passing[-1]) if passing.size else a
        if k not in candidates:
            candidates.append(k)
            candidates.sort()
    return int(k), tuple(candidates)


def _decision(k, candidates, deviation, first, second, trimmed, sigma2, sig,
              spectrum, warnings):
    dev = np.asarray(deviation, dtype=np.float64).copy()
    dev.flags.writeable = False
    return RankDecision(
        k=int(k), candidates=tuple(candidates), deviation=dev,
        first_trace=first, second_trace=second, trimmed_range=tuple(trimmed),
        sigma2_used=sigma2, mp_samples=np.asarray(sig), spectrum=spectrum,
        warnings=tuple(warnings),
    )


def estimate_rank(m: DataMatrix, cfg: RankConfig | None = None) -> RankDecision:
    """Estimate the detectable signal rank of a data matrix.

    Deterministic for a fixed ``cfg.seed``: the eigensolver, the MP sampler,
    and both change-point passes draw from independent child streams of one
    seed sequence.
    """
    cfg = cfg if cfg is not None else RankConfig()
    warnings: list[str] = []
    m = as_centered(m)
    children = np.random.SeedSequence(cfg.seed).spawn(4)

    spectrum = spectra.compute_spectrum(m, cfg.n_prime, cfg.eig_tol, seed=children[0])
    lam = spectrum.eigenvalues
    n_prime = spectrum.n_prime

    try:
        sigma2 = mp_law.estimate_noise_variance(spectrum)
    except DegenerateSpectrum:
        if lam[0] <= 1e-12:
            warnings.append("matrix is numerically zero; no detectable signal")
            return _decision(0, (), lam, None, None, (0, 0), None,
                             np.zeros(n_prime), spectrum, warnings)
        warnings.append(
            "trailing spectrum is numerically zero; noise variance unresolved, "
            "reporting k = n_prime")
        return _decision(n_prime, (), lam, None, None, (0, 0), None,
                         np.zeros(n_prime), spectrum, warnings)

    c_eff = min(spectrum.n, spectrum.p) / max(spectrum.n, spectrum.p)
    model = mp_law.mp_model(c_eff, sigma2)
    sig = mp_law.mp_sample(n_prime, model, np.random.default_rng(children[1]))
    deviation = lam - sig

    n_eff = min(spectrum.n, spectrum.p)
    p_eff = max(spectrum.n, spectrum.p)
    if n_eff >= 2 and p_eff >= 2:
        gamma4 = cfg.gamma4 if cfg.gamma4 is not None else 3.0 * sigma2 ** 2
        bound = gershgorin_upper(
            EntryMoments(sigma2=sigma2, gamma4=gamma4, n=n_eff, p=p_eff),
            cfg.confidence)
        if lam[0] <= bound.lambda_max_bound:
            warnings.append(
                f"largest eigenvalue {lam[0]:.6g} lies below the Gershgorin-GEV "
                f"noise bound {bound.lambda_max_bound:.6g} at confidence "
                f"{cfg.confidence:g}")

    if sig[0] > lam[0]:
        warnings.append(
            "largest noise sample exceeds the largest observed eigenvalue; k = 0")
        return _decision(0, (), deviation, None, None, (0, 0), sigma2, sig,
                         spectrum, warnings)

    if n_prime < 3:
        warnings.append("n_prime < 3: too short for change-point analysis; k = 0")
        return _decision(0, (), deviation, None, None, (0, n_prime), sigma2, sig,
                         spectrum, warnings)

    prior = linear_prior(n_prime, cfg.prior_start)
    first = bcp_posterior(deviation, prior, sweeps=cfg.sweeps, burnin=cfg.burnin,
                          rng=np.random.default_rng(children[2]), w0=cfg.w0)
    trimmed = trim_alarm(first.probs, eps=cfg.trim_eps, spike=cfg.trim_spike)
    second = double_posterior(first, sweeps=cfg.sweeps, burnin=cfg.burnin,
                              rng=np.random.default_rng(children[3]), w0=cfg.w0)
    if trimmed[1] - trimmed[0] <= 1:
        warnings.append("posterior change probabilities flat everywhere; k = 0")
    k, candidates = select_k(first, second, cfg.delta, trimmed)
    return _decision(k, candidates, deviation, first, second, trimmed, sigma2,
                     sig, spectrum, warnings)
