"""Synthetic benchmark datasets: spiral band, ring, Gaussian mixtures.

All generators are pure functions of (parameters, seed).
"""

from dataclasses import dataclass

import numpy as np

from .errors import BadParams, BadSpec


def gen_swiss_roll(n: int, rng: np.random.Generator) -> np.ndarray:
    """3-d spiral band (t cos t, u, t sin t), t ~ U[1.5pi, 4.5pi], u ~ U[0, 21].

    Intrinsic dimension 2 (the (t, u) sheet rolled into 3-space).
    """
    if n < 1:
        raise BadParams(f"n must be >= 1, got {n}")
    t = rng.uniform(1.5 * np.pi, 4.5 * np.pi, size=n)
    u = rng.uniform(0.0, 21.0, size=n)
    return np.column_stack([t * np.cos(t), u, t * np.sin(t)])


def gen_ring(n: int, rng: np.random.Generator, radius: float = 1.0, sigma: float = 0.1) -> np.ndarray:
    """2-d ring: radius ~ N(radius, sigma^2), angle uniform on [0, 2pi)."""
    if n < 1:
        raise BadParams(f"n must be >= 1, got {n}")
    r = rng.normal(radius, sigma, size=n)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


@dataclass(frozen=True)
class GmmSpec:
    """Mixture weights, component means and covariance matrices."""

    weights: np.ndarray
    means: np.ndarray   # (K, d)
    covs: np.ndarray    # (K, d, d)

    def validate(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        means = np.asarray(self.means, dtype=np.float64)
        covs = np.asarray(self.covs, dtype=np.float64)
        if w.ndim != 1 or means.ndim != 2 or covs.ndim != 3:
            raise BadSpec("weights (K,), means (K,d), covs (K,d,d) expected")
        k, d = means.shape
        if w.size != k or covs.shape != (k, d, d):
            raise BadSpec("component counts of weights, means, covs disagree")
        if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-12:
            raise BadSpec("weights must be non-negative and sum to 1")
        for j in range(k):
            if not np.allclose(covs[j], covs[j].T):
                raise BadSpec(f"covariance {j} is not symmetric")
            try:
                np.linalg.cholesky(covs[j])
            except np.linalg.LinAlgError:
                raise BadSpec(f"covariance {j} is not positive definite") from None


def gen_gmm(spec: GmmSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. draws from the Gaussian mixture."""
    spec.validate()
    if n < 1:
        raise BadParams(f"n must be >= 1, got {n}")
    weights = np.asarray(spec.weights, dtype=np.float64)
    means = np.asarray(spec.means, dtype=np.float64)
    covs = np.asarray(spec.covs, dtype=np.float64)
    k, d = means.shape
    assignment = rng.choice(k, size=n, p=weights)
    out = np.empty((n, d))
    for j in range(k):
        mask = assignment == j
        count = int(mask.sum())
        if count:
            chol = np.linalg.cholesky(covs[j])
            out[mask] = means[j] + rng.standard_normal((count, d)) @ chol.T
    return out
