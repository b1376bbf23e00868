"""Scaled Gram matrices and their truncated eigenvalue spectra.

For an n x p centered matrix the scaled Gram matrix is (1/p) X X^T when
p > n and (1/n) X^T X otherwise, so the working side is always min(n, p)
and the two sides share their leading eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ConvergenceFailure, NotCentered, ShapeMismatch
from .matrix_io import DataMatrix

#: side length above which the truncated (Lanczos) path is used
DENSE_SIDE_LIMIT = 500

#: default cap on the number of leading components
DEFAULT_N_PRIME_CAP = 100

SCALE_DIVIDE_BY_P = "divide-by-p"
SCALE_DIVIDE_BY_N = "divide-by-n"


@dataclass(frozen=True)
class SpectrumEstimate:
    """Leading scaled eigenvalues of a Gram matrix plus scaling metadata.

    ``eigenvalues`` holds the ``n_prime`` largest eigenvalues in
    non-increasing order, clamped at 0. ``gram_trace`` is the trace of the
    scaled Gram matrix (the sum of all its eigenvalues), kept so the unseen
    trailing spectrum can be reasoned about without a full decomposition.
    """

    eigenvalues: np.ndarray
    n_prime: int
    n: int
    p: int
    rect_ratio: float
    scale_side: str
    gram_trace: float | None = None
    eigenvectors: np.ndarray | None = None

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=np.float64)
        if lam.ndim != 1 or lam.size != self.n_prime:
            raise ValueError("eigenvalues must be a vector of length n_prime")
        if self.n_prime < 1 or self.n_prime > min(self.n, self.p):
            raise ValueError("n_prime must lie in [1, min(n, p)]")
        if np.any(np.diff(lam) > 1e-12 * max(abs(lam[0]), 1.0)):
            raise ValueError("eigenvalues must be sorted non-increasing")
        scale = max(abs(lam[0]), 1.0)
        if np.any(lam < -1e-10 * scale):
            raise ValueError("eigenvalues are more negative than round-off allows")
        lam = np.maximum(lam, 0.0)
        lam.flags.writeable = False
        object.__setattr__(self, "eigenvalues", lam)
        expect_side = SCALE_DIVIDE_BY_P if self.p > self.n else SCALE_DIVIDE_BY_N
        if self.scale_side != expect_side:
            raise ValueError(f"scale_side must be {expect_side} for n={self.n}, p={self.p}")
        if self.rect_ratio != self.n / self.p:
            raise ValueError("rect_ratio must equal n/p exactly")
        if self.eigenvectors is not None:
            v = np.asarray(self.eigenvectors, dtype=np.float64)
            if v.shape[1] != self.n_prime:
                raise ValueError("eigenvectors must have n_prime columns")
            gram = v.T @ v
            if not np.allclose(gram, np.eye(self.n_prime), atol=1e-8):
                raise ValueError("eigenvector columns are not orthonormal within 1e-8")
            object.__setattr__(self, "eigenvectors", v)


def scaled_gram(m: DataMatrix) -> np.ndarray:
    """Return (1/p) X X^T when p > n, else (1/n) X^T X; always symmetric PSD."""
    if not m.centered:
        raise NotCentered("scaled_gram requires centered columns")
    x = m.values
    if m.p > m.n:
        g = (x @ x.T) / m.p
    else:
        g = (x.T @ x) / m.n
    return (g + g.T) / 2.0


def eig_truncated(g: np.ndarray, n_prime: int, tol: float = 0.0, *,
                  matrix_shape: tuple[int, int] | None = None,
                  seed: int | None = None,
                  compute_vectors: bool = False) -> SpectrumEstimate:
    """Compute the ``n_prime`` largest eigenvalues of a symmetric matrix ``g``.

    Uses a dense decomposition for sides up to ``DENSE_SIDE_LIMIT`` and a
    seeded Lanczos solver above it; both satisfy the same (tol, seed)
    contract. ``matrix_shape`` carries the (n, p) of the originating data
    matrix; it defaults to the square shape of ``g`` itself.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got shape {g.shape}")
    side = g.shape[0]
    if not np.allclose(g, g.T, atol=1e-12 * max(np.abs(g).max(), 1.0)):
        raise ValueError("matrix is not symmetric within tolerance")
    if not 1 <= n_prime <= side:
        raise ValueError(f"n_prime must be in [1, {side}], got {n_prime}")

    vecs = None
    if side > DENSE_SIDE_LIMIT and n_prime <= side - 2:
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(side)
        try:
            if compute_vectors:
                lam, vecs = spla.eigsh(g, k=n_prime, which="LA", tol=tol, v0=v0)
            else:
                lam = spla.eigsh(g, k=n_prime, which="LA", tol=tol, v0=v0,
                                 return_eigenvectors=False)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceFailure(getattr(exc, "iterations", -1) or -1) from exc
        order = np.argsort(lam)[::-1]
        lam = lam[order]
        if vecs is not None:
            vecs = vecs[:, order]
    else:
        if compute_vectors:
            lam_all, vec_all = np.linalg.eigh(g)
            lam = lam_all[::-1][:n_prime]
            vecs = vec_all[:, ::-1][:, :n_prime]
        else:
            lam = np.linalg.eigvalsh(g)[::-1][:n_prime]

    n, p = matrix_shape if matrix_shape is not None else (side, side)
    return SpectrumEstimate(
        eigenvalues=lam,
        n_prime=n_prime,
        n=n,
        p=p,
        rect_ratio=n / p,
        scale_side=SCALE_DIVIDE_BY_P if p > n else SCALE_DIVIDE_BY_N,
        gram_trace=float(np.trace(g)),
        eigenvectors=vecs,
    )


def compute_spectrum(m: DataMatrix, n_prime: int | None = None, tol: float = 0.0,
                     seed: int | None = None,
                     compute_vectors: bool = False) -> SpectrumEstimate:
    """Build the scaled Gram matrix of ``m`` and decompose its leading part."""
    g = scaled_gram(m)
    side = g.shape[0]
    if n_prime is None:
        n_prime = min(side, DEFAULT_N_PRIME_CAP)
    return eig_truncated(g, n_prime, tol, matrix_shape=(m.n, m.p), seed=seed,
                         compute_vectors=compute_vectors)


def cross_term_norm(s: np.ndarray, noise: np.ndarray) -> float:
    """Max-abs entry of (1/p) S N^T for equally shaped n x p matrices."""
    s = np.asarray(s, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if s.shape != noise.shape or s.ndim != 2:
        raise ShapeMismatch(f"shapes {s.shape} and {noise.shape} do not match")
    p = s.shape[1]
    return float(np.abs(s @ noise.T).max() / p)
