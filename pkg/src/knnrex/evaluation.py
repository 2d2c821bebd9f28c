"""Binned Hellinger distance, inverted cross-validation, and Welch's t-test.

Binning is equal-width per dimension over the range of whatever data the
spec is built from; joint bins are addressed by their per-dimension index
tuples and counted sparsely, so high-dimensional comparisons stay feasible.
Inverted cross-validation trains on one small fold and scores the synthetic
population against the remaining folds.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BadParams, DegenerateVariance, EmptyData, TooFewPoints
from .estimators import (
    EstimatorConfig,
    km_fit,
    km_synth,
    synth_bmp,
    synth_fixed_gaussian,
    synth_knn_rex,
)
from .whiten import whiten_apply, whiten_fit, whiten_invert


@dataclass(frozen=True)
class BinningSpec:
    """Equal-width joint binning; one edge array per dimension.

    Bins are left-closed right-open with the last bin right-closed;
    out-of-range points clamp to the boundary bins. A constant dimension
    degenerates to a single bin.
    """

    edges: tuple

    @property
    def dim(self) -> int:
        return len(self.edges)

    def bins_per_dim(self) -> tuple:
        return tuple(max(e.size - 1, 1) for e in self.edges)

    def assign(self, X: np.ndarray) -> np.ndarray:
        """Per-dimension bin indices, shape (n, d), clamped into range."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise BadParams(f"expected points of dimension {self.dim}, got shape {X.shape}")
        out = np.empty(X.shape, dtype=np.int64)
        for j, edges in enumerate(self.edges):
            nb = max(edges.size - 1, 1)
            idx = np.searchsorted(edges, X[:, j], side="right") - 1
            out[:, j] = np.clip(idx, 0, nb - 1)
        return out


def make_binning(data: np.ndarray, bins_per_dim: int) -> BinningSpec:
    """Equal-width edges per dimension spanning [min, max] of ``data``."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise EmptyData("cannot build a binning from empty data")
    if bins_per_dim < 1:
        raise BadParams(f"bins_per_dim must be >= 1, got {bins_per_dim}")
    edges = []
    for j in range(data.shape[1]):
        lo, hi = float(data[:, j].min()), float(data[:, j].max())
        if hi > lo:
            edges.append(np.linspace(lo, hi, bins_per_dim + 1))
        else:
            edges.append(np.asarray([lo, lo]))  # degenerate single bin
    return BinningSpec(edges=tuple(edges))


def hellinger(Y: np.ndarray, Z: np.ndarray, binning: BinningSpec) -> float:
    """Hellinger distance between the binned histograms of Y and Z, in [0, 1].

    Summation runs over the union of occupied bins; bins empty in both sets
    contribute nothing.
    """
    Y = np.asarray(Y, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    if Y.shape[0] == 0 or Z.shape[0] == 0:
        raise EmptyData("hellinger requires two non-empty point sets")
    iy = binning.assign(Y)
    iz = binning.assign(Z)
    both = np.concatenate([iy, iz], axis=0)
    _, inverse = np.unique(both, axis=0, return_inverse=True)
    n_bins = int(inverse.max()) + 1
    cy = np.bincount(inverse[: iy.shape[0]], minlength=n_bins)
    cz = np.bincount(inverse[iy.shape[0] :], minlength=n_bins)
    py = np.sqrt(cy / Y.shape[0])
    pz = np.sqrt(cz / Z.shape[0])
    return float(np.sqrt(0.5 * np.sum((py - pz) ** 2)))


# ---------------------------------------------------------------------------
# Welch's t-test
# ---------------------------------------------------------------------------


def welch_t(mean_a, sd_a, n_a, mean_b, sd_b, n_b):
    """Welch's unequal-variance t statistic, its degrees of freedom, and the
    two-sided p-value.

    Returns (t, dof, p). p is computed from the regularized incomplete beta
    function; see ``_betainc_reg``.
    """
    if n_a < 2 or n_b < 2:
        raise BadParams(f"need sample sizes >= 2, got {n_a}, {n_b}")
    if sd_a < 0 or sd_b < 0:
        raise BadParams("standard deviations must be >= 0")
    if sd_a == 0.0 and sd_b == 0.0:
        raise DegenerateVariance("both groups have zero variance")
    va = sd_a * sd_a / n_a
    vb = sd_b * sd_b / n_b
    se2 = va + vb
    t = (mean_a - mean_b) / math.sqrt(se2)
    dof = se2 * se2 / (va * va / (n_a - 1) + vb * vb / (n_b - 1))
    p = _betainc_reg(dof / 2.0, 0.5, dof / (dof + t * t)) if t != 0.0 else 1.0
    return t, dof, p


def _betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) via Lentz's continued fraction."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _betacf(a: float, b: float, x: float, max_iter: int = 300, eps: float = 3e-15) -> float:
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for i in range(1, max_iter + 1):
        m2 = 2 * i
        aa = i * (b - i) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + i) * (qab + i) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    return h


# ---------------------------------------------------------------------------
# Inverted cross-validation
# ---------------------------------------------------------------------------


@dataclass
class IcvReport:
    """Per-fold Hellinger results for one method plus the copying baseline."""

    config: dict
    folds: int
    bins_per_dim: int
    n_used: int
    fold_size: int
    population_size: int
    fold_hellinger: np.ndarray
    baseline_hellinger: np.ndarray
    fold_seconds: np.ndarray
    mean: float = field(init=False)
    std: float = field(init=False)
    baseline_mean: float = field(init=False)
    baseline_std: float = field(init=False)

    def __post_init__(self):
        self.mean = float(np.mean(self.fold_hellinger))
        self.std = float(np.std(self.fold_hellinger, ddof=1))
        self.baseline_mean = float(np.mean(self.baseline_hellinger))
        self.baseline_std = float(np.std(self.baseline_hellinger, ddof=1))


def _synthesize_whitened(train_w, cfg: EstimatorConfig, l: int, rng):
    if cfg.method == "knn_rex":
        return synth_knn_rex(train_w, cfg.k, cfg.m, l, rng)
    if cfg.method == "fixed_gaussian":
        return synth_fixed_gaussian(train_w, cfg.h, l, rng)
    if cfg.method == "bmp":
        return synth_bmp(train_w, cfg.k, cfg.h, l, rng)
    if cfg.method == "km_rex":
        model = km_fit(train_w, cfg.L, cfg.m, rng, stall_limit=cfg.stall_limit, ridge=cfg.ridge)
        return km_synth(model, train_w, l, rng)
    raise BadParams(f"method {cfg.method!r} cannot run inside inverted cross-validation")


def icv_run(
    data: np.ndarray,
    cfg: EstimatorConfig,
    folds: int = 100,
    bins_per_dim: int = 10,
    rng: np.random.Generator | None = None,
    threads: int = 1,
) -> IcvReport:
    """Inverted cross-validation: train on one fold, test on the rest.

    The data is shuffled once and the division remainder dropped (the
    shuffle makes the drop random); fold i trains on its n/folds points,
    synthesizes (folds-1) * n/folds points, and is scored against the
    held-out points with a binning built on the union of the two compared
    sets. The copying baseline (raw fold vs. test) is scored the same way.
    Folds own spawned random streams, so results do not depend on
    ``threads`` and a fixed master seed reproduces everything, fold
    assignment included.
    """
    data = np.asarray(data, dtype=np.float64)
    n = data.shape[0]
    if folds < 2:
        raise BadParams(f"need folds >= 2, got {folds}")
    if n < folds:
        raise TooFewPoints(f"need at least one point per fold: n = {n}, folds = {folds}")
    cfg.validate()
    if rng is None:
        rng = np.random.default_rng(cfg.seed)

    fold_size = n // folds
    used = fold_size * folds
    shuffled = data[rng.permutation(n)[:used]]
    population_size = (folds - 1) * fold_size
    streams = rng.spawn(folds)

    def run_fold(i):
        t0 = time.perf_counter()
        lo, hi = i * fold_size, (i + 1) * fold_size
        train = shuffled[lo:hi]
        test = np.concatenate([shuffled[:lo], shuffled[hi:]], axis=0)
        transform = whiten_fit(train)
        train_w = whiten_apply(transform, train)
        synth_w = _synthesize_whitened(train_w, cfg, population_size, streams[i])
        synth = whiten_invert(transform, synth_w)
        score = hellinger(synth, test, make_binning(np.concatenate([synth, test]), bins_per_dim))
        base = hellinger(train, test, make_binning(np.concatenate([train, test]), bins_per_dim))
        return score, base, time.perf_counter() - t0

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_fold, range(folds)))
    else:
        results = [run_fold(i) for i in range(folds)]

    scores, bases, seconds = (np.asarray(col) for col in zip(*results))
    return IcvReport(
        config=cfg.echo(),
        folds=folds,
        bins_per_dim=bins_per_dim,
        n_used=used,
        fold_size=fold_size,
        population_size=population_size,
        fold_hellinger=scores,
        baseline_hellinger=bases,
        fold_seconds=seconds,
    )
