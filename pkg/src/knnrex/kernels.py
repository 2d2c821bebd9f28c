"""REX crossover kernel: sampler, implied Gaussian density, and the
spherical Gaussian sampler used by the fixed-bandwidth and BMP baselines.

A kernel construction set (KCS) is an (m, d) array of points. Sampling
never forms the covariance matrix: a draw is the KCS mean plus normally
weighted deviations of the members from the mean, which costs O(md). The
density path (needed only for the likelihood-optimized baseline and for
tests) forms the Gaussian MLE of the KCS explicitly.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyKcs, SingularSigma

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class KcsStats:
    """Maximum-likelihood mean and covariance (1/m normalizer) of a KCS."""

    mu: np.ndarray     # (d,)
    sigma: np.ndarray  # (d, d)


def kcs_stats(kcs: np.ndarray) -> KcsStats:
    kcs = _as_kcs(kcs)
    mu = kcs.mean(axis=0)
    dev = kcs - mu
    sigma = dev.T @ dev / kcs.shape[0]
    return KcsStats(mu=mu, sigma=sigma)


def rex_sample(kcs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw one point: mu + sum_i eps_i (x_i - mu), eps_i ~ N(0, 1/m).

    Consumes exactly m standard-normal draws, in KCS order, so (seed, KCS)
    fully determines the output.
    """
    kcs = _as_kcs(kcs)
    m = kcs.shape[0]
    eps = rng.standard_normal(m) * math.sqrt(1.0 / m)
    mu = kcs.mean(axis=0)
    return mu + eps @ (kcs - mu)


def rex_samples(kcs: np.ndarray, n_points: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n_points i.i.d. REX points from one KCS (vectorized)."""
    kcs = _as_kcs(kcs)
    m = kcs.shape[0]
    eps = rng.standard_normal((n_points, m)) * math.sqrt(1.0 / m)
    mu = kcs.mean(axis=0)
    return mu + eps @ (kcs - mu)


def rex_log_density(y: np.ndarray, kcs: np.ndarray, ridge: float = 0.0) -> np.ndarray:
    """Log density of the Gaussian N(mu, sigma + ridge*I) implied by the KCS.

    y may be a single point (d,) or a batch (n, d); the return matches.
    Raises SingularSigma when the regularized covariance is not positive
    definite (e.g. m <= d with ridge 0).
    """
    kcs = _as_kcs(kcs)
    y = np.asarray(y, dtype=np.float64)
    stats = kcs_stats(kcs)
    d = kcs.shape[1]
    sigma = stats.sigma
    if ridge:
        sigma = sigma + ridge * np.eye(d)
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise SingularSigma(
            f"KCS covariance is singular for m = {kcs.shape[0]}, d = {d} "
            f"(ridge = {ridge:g})"
        ) from None
    single = y.ndim == 1
    dev = np.atleast_2d(y) - stats.mu
    z = np.linalg.solve(chol, dev.T)
    maha = np.einsum("ij,ij->j", z, z)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    out = -0.5 * (d * _LOG_2PI + logdet + maha)
    return out[0] if single else out


def rex_density(y: np.ndarray, kcs: np.ndarray, ridge: float = 0.0) -> np.ndarray:
    return np.exp(rex_log_density(y, kcs, ridge=ridge))


def gaussian_sample(center: np.ndarray, h: float, rng: np.random.Generator) -> np.ndarray:
    """One draw from the spherical Gaussian N(center, h^2 I); h = 0 allowed."""
    center = np.asarray(center, dtype=np.float64)
    z = rng.standard_normal(center.shape[0])
    return center + h * z


def _as_kcs(kcs: np.ndarray) -> np.ndarray:
    kcs = np.asarray(kcs, dtype=np.float64)
    if kcs.ndim == 1:
        kcs = kcs[np.newaxis, :]
    if kcs.shape[0] == 0:
        raise EmptyKcs("kernel construction set must contain at least one point")
    return kcs
