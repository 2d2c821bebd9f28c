"""Population synthesizers.

Four resampling methods over an n x d training sample:

* ``synth_knn_rex``      -- for every output point, seed uniformly on the
  sample, draw a fresh kernel construction set (the seed plus m-1 distinct
  points from its k nearest neighbors) and take one REX draw. Redrawing the
  set per output point is the bagging that averages over all subset choices.
* ``synth_bias_corrected`` -- the same kernel steered so that per-variable
  bin counts of the output match published marginal frequencies exactly.
* ``synth_fixed_gaussian`` -- classical fixed scalar-bandwidth resampler.
* ``synth_bmp``          -- variable-bandwidth resampler with per-point
  bandwidth h * (distance to the k-th nearest neighbor).

Plus ``km_fit``/``km_synth``: the likelihood-optimized crossover-kernel
baseline that hill-climbs the choice of L fixed kernel construction sets,
and ``suggest_params``, the optimization-free parameter rule.

Synthesis is chunked and vectorized; each chunk consumes a child random
stream spawned from the caller's generator, so (seed, chunk_size) fixes the
output exactly and chunks may run in any order.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadParams,
    BadSpec,
    EmptySample,
    InconsistentMarginals,
    SingularSigma,
    StallLimit,
)
from .kernels import kcs_stats, rex_log_density, rex_sample, rex_samples
from .knn import build_knn, query_neighbors
from .whiten import whiten_apply, whiten_fit, whiten_invert

METHODS = ("knn_rex", "knn_rex_corrected", "fixed_gaussian", "bmp", "km_rex")

DEFAULT_CHUNK = 8192


@dataclass
class EstimatorConfig:
    """Resolved parameters for one synthesis method."""

    method: str
    k: int = 30
    m: int = 3
    h: float = 0.05
    L: int = 10
    seed: int = 0
    stall_limit: int = 10_000
    round_integers: bool = False
    ridge: float = 0.0

    def validate(self) -> None:
        if self.method not in METHODS:
            raise BadParams(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.method in ("knn_rex", "knn_rex_corrected"):
            if self.k == 0 and self.m != 1:
                raise BadParams("k = 0 admits only m = 1 (pure bootstrap)")
            if not 1 <= self.m <= self.k + 1:
                raise BadParams(f"need 1 <= m <= k+1, got m = {self.m}, k = {self.k}")
        if self.method in ("fixed_gaussian", "bmp") and self.h < 0:
            raise BadParams(f"bandwidth must be >= 0, got {self.h}")
        if self.method == "km_rex" and self.L < 1:
            raise BadParams(f"need L >= 1, got {self.L}")

    def echo(self) -> dict:
        """Stable key/value view for reports and manifests."""
        return {
            "method": self.method,
            "k": self.k,
            "m": self.m,
            "h": self.h,
            "L": self.L,
            "seed": self.seed,
            "stall_limit": self.stall_limit,
            "round_integers": self.round_integers,
            "ridge": self.ridge,
        }


def _chunks(total: int, chunk_size: int):
    for start in range(0, total, chunk_size):
        yield start, min(start + chunk_size, total)


def synth_knn_rex(
    X: np.ndarray,
    k: int,
    m: int,
    l: int,
    rng: np.random.Generator,
    chunk_size: int = DEFAULT_CHUNK,
    index=None,
) -> np.ndarray:
    """Synthesize l points with the k-nearest-neighbor REX kernel.

    m = 1 degenerates to a plain bootstrap (the REX draw collapses onto the
    seed point); k = 0 forces m = 1 and skips index construction. A
    prebuilt ``index`` for (X, k) may be passed to keep the neighbor phase
    out of synthesis timings.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n == 0:
        raise EmptySample("training sample is empty")
    if k == 0 and m != 1:
        raise BadParams("k = 0 admits only m = 1 (pure bootstrap)")
    if not 1 <= m <= k + 1:
        raise BadParams(f"need 1 <= m <= k+1, got m = {m}, k = {k}")
    out = np.empty((l, d))
    if l == 0:
        return out
    if index is None and m > 1:
        index = build_knn(X, k)
    scale = math.sqrt(1.0 / m)
    streams = rng.spawn(len(range(0, l, chunk_size)))
    for (start, stop), crng in zip(_chunks(l, chunk_size), streams):
        size = stop - start
        seeds = crng.integers(0, n, size=size)
        if m == 1:
            out[start:stop] = X[seeds]
            continue
        neighbors = index.ids[seeds]
        if m - 1 == k:
            picks = neighbors
        elif m - 1 == 1:
            cols = crng.integers(0, k, size=size)
            picks = neighbors[np.arange(size), cols][:, np.newaxis]
        else:
            # m-1 smallest of k i.i.d. uniform scores = a uniform subset.
            scores = crng.random((size, k))
            pos = np.argpartition(scores, m - 1, axis=1)[:, : m - 1]
            picks = np.take_along_axis(neighbors, pos, axis=1)
        kcs = np.concatenate([X[seeds][:, np.newaxis, :], X[picks]], axis=1)
        mu = kcs.mean(axis=1)
        eps = crng.standard_normal((size, m)) * scale
        out[start:stop] = mu + np.einsum("sm,smd->sd", eps, kcs - mu[:, np.newaxis, :])
    return out


def synth_fixed_gaussian(
    X: np.ndarray,
    h: float,
    l: int,
    rng: np.random.Generator,
    chunk_size: int = DEFAULT_CHUNK,
) -> np.ndarray:
    """Synthesize l points from the fixed scalar-bandwidth Gaussian mixture."""
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n == 0:
        raise EmptySample("training sample is empty")
    if h < 0:
        raise BadParams(f"bandwidth must be >= 0, got {h}")
    out = np.empty((l, d))
    if l == 0:
        return out
    streams = rng.spawn(len(range(0, l, chunk_size)))
    for (start, stop), crng in zip(_chunks(l, chunk_size), streams):
        size = stop - start
        seeds = crng.integers(0, n, size=size)
        z = crng.standard_normal((size, d))
        out[start:stop] = X[seeds] + h * z
    return out


def synth_bmp(
    X: np.ndarray,
    k: int,
    h: float,
    l: int,
    rng: np.random.Generator,
    chunk_size: int = DEFAULT_CHUNK,
    index=None,
) -> np.ndarray:
    """Synthesize l points with per-point bandwidth h * delta_ik."""
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n == 0:
        raise EmptySample("training sample is empty")
    if h < 0:
        raise BadParams(f"bandwidth multiplier must be >= 0, got {h}")
    out = np.empty((l, d))
    if l == 0:
        return out
    if index is None:
        index = build_knn(X, k)
    widths = h * index.dists[:, k - 1]
    streams = rng.spawn(len(range(0, l, chunk_size)))
    for (start, stop), crng in zip(_chunks(l, chunk_size), streams):
        size = stop - start
        seeds = crng.integers(0, n, size=size)
        z = crng.standard_normal((size, d))
        out[start:stop] = X[seeds] + widths[seeds, np.newaxis] * z
    return out


def suggest_params(d_intrinsic: int, n: int | None = None) -> tuple[int, int]:
    """Optimization-free (k, m) rule: m = d'+1, k = 30 (clamped to [10, 50]).

    When the training size n is supplied, k is further clamped to n-1.
    """
    if d_intrinsic < 1:
        raise BadParams(f"intrinsic dimension must be >= 1, got {d_intrinsic}")
    k = 30  # midpoint of the recommended [10, 50] range; accuracy is insensitive to k
    if n is not None:
        k = min(k, n - 1)
    return k, d_intrinsic + 1


# ---------------------------------------------------------------------------
# Marginal-frequency bias correction
# ---------------------------------------------------------------------------


@dataclass
class MarginalSpec:
    """Per-variable bin edges with target frequencies.

    Bins are left-closed right-open, with the last bin right-closed. Edges
    must be strictly increasing and contiguous per variable, and each
    variable's frequencies must sum to the declared population size.
    """

    names: tuple
    edges: tuple      # one strictly increasing float array per variable
    freqs: tuple      # one non-negative int array per variable
    total: int

    def __post_init__(self):
        self.names = tuple(self.names)
        self.edges = tuple(np.asarray(e, dtype=np.float64) for e in self.edges)
        self.freqs = tuple(np.asarray(f, dtype=np.int64) for f in self.freqs)
        self.validate()

    def validate(self) -> None:
        if not (len(self.names) == len(self.edges) == len(self.freqs)):
            raise BadSpec("names, edges and freqs must align")
        if len(set(self.names)) != len(self.names):
            raise BadSpec(f"duplicate variable names in {self.names}")
        if self.total < 0:
            raise BadSpec(f"total population size must be >= 0, got {self.total}")
        for name, edges, freqs in zip(self.names, self.edges, self.freqs):
            if edges.ndim != 1 or edges.size < 2:
                raise BadSpec(f"variable {name!r}: need at least one bin")
            if not np.all(np.diff(edges) > 0):
                raise BadSpec(f"variable {name!r}: bin edges must be strictly increasing")
            if freqs.size != edges.size - 1:
                raise BadSpec(f"variable {name!r}: {freqs.size} frequencies for {edges.size - 1} bins")
            if np.any(freqs < 0):
                raise BadSpec(f"variable {name!r}: negative bin frequency")
            if int(freqs.sum()) != self.total:
                raise InconsistentMarginals(
                    f"variable {name!r}: frequencies sum to {int(freqs.sum())}, "
                    f"declared total is {self.total}"
                )

    def bin_of(self, var: int, values: np.ndarray) -> np.ndarray:
        """Bin index per value for one variable; -1 for out-of-range values."""
        edges = self.edges[var]
        values = np.asarray(values, dtype=np.float64)
        idx = np.searchsorted(edges, values, side="right") - 1
        idx = np.where(values == edges[-1], edges.size - 2, idx)
        idx = np.where((values < edges[0]) | (values > edges[-1]), -1, idx)
        return idx


def _round_half_away(values: np.ndarray) -> np.ndarray:
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


class _BinLedger:
    """Occupancy bookkeeping for the output set of the bias-corrected loop.

    Tracks, per (variable, bin), the list of member point keys with O(1)
    swap-removal, so a random member can be evicted deterministically.
    """

    def __init__(self, freqs):
        self.points = []       # original-units coordinates, append-only
        self.point_bins = []   # per point: tuple of per-variable bin ids
        self.active = []
        self.n_active = 0
        self.members = [[[] for _ in f] for f in freqs]
        self.pos = {}          # (var, key) -> position in members[var][bin]

    def add(self, point, bins):
        key = len(self.points)
        self.points.append(point)
        self.point_bins.append(bins)
        self.active.append(True)
        self.n_active += 1
        for v, b in enumerate(bins):
            bucket = self.members[v][b]
            self.pos[(v, key)] = len(bucket)
            bucket.append(key)
        return key

    def remove(self, key):
        for v, b in enumerate(self.point_bins[key]):
            bucket = self.members[v][b]
            p = self.pos.pop((v, key))
            last = bucket.pop()
            if last != key:
                bucket[p] = last
                self.pos[(v, last)] = p
        self.active[key] = False
        self.n_active -= 1

    def survivors(self, dim):
        out = np.empty((self.n_active, dim))
        row = 0
        for key, alive in enumerate(self.active):
            if alive:
                out[row] = self.points[key]
                row += 1
        return out


def synth_bias_corrected(
    X: np.ndarray,
    marginals: MarginalSpec,
    k: int,
    m: int,
    rng: np.random.Generator,
    columns=None,
    round_integers: bool = False,
    stall_factor: int = 50,
) -> np.ndarray:
    """Synthesize a population whose marginal bin counts match ``marginals``.

    The kernel machinery runs in whitened coordinates while bin membership is
    tested in original units, so the marginal targets apply to the data as
    published. Each iteration seeds the kernel in the currently most vacant
    bin (ties broken by variable order, then bin order): from the training
    points in that bin when any exist, otherwise from a fresh uniform point
    on the bin (other coordinates uniform on their empirical ranges) whose
    neighbors are found on the fly. Overfull bins are drained by evicting
    random members until every count is back within its target, so
    ``|Y_b| <= F_b`` holds after every iteration and the loop exits exactly
    when all counts hit their targets.

    Raises StallLimit (carrying the partial output) after ``stall_factor * l``
    iterations without net progress. When ``round_integers`` is set,
    coordinates are rounded half-away-from-zero after the map back to
    original units, before bin membership is tested.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n == 0:
        raise EmptySample("training sample is empty")
    if k == 0 and m != 1:
        raise BadParams("k = 0 admits only m = 1 (pure bootstrap)")
    if not 1 <= m <= k + 1:
        raise BadParams(f"need 1 <= m <= k+1, got m = {m}, k = {k}")

    if columns is None:
        columns = [f"x{i + 1}" for i in range(d)]
    try:
        var_cols = [list(columns).index(name) for name in marginals.names]
    except ValueError as exc:
        raise BadSpec(f"marginal variable not found among columns {list(columns)}: {exc}") from None

    n_vars = len(marginals.names)
    for v, col in enumerate(var_cols):
        if np.any(marginals.bin_of(v, X[:, col]) < 0):
            raise InconsistentMarginals(
                f"variable {marginals.names[v]!r}: sample values fall outside the binned range"
            )

    l = marginals.total
    if l == 0:
        return np.empty((0, d))

    needs_kernel = m > 1
    if needs_kernel:
        transform = whiten_fit(X)
        Xw = whiten_apply(transform, X)
        index = build_knn(Xw, k)
    mins = X.min(axis=0)
    spans = X.max(axis=0) - mins

    pools = [
        [np.flatnonzero(marginals.bin_of(v, X[:, col]) == b) for b in range(marginals.freqs[v].size)]
        for v, col in enumerate(var_cols)
    ]

    ledger = _BinLedger(marginals.freqs)
    counts = [np.zeros(f.size, dtype=np.int64) for f in marginals.freqs]

    stall = 0
    best_fill = 0
    iterations = 0
    cap = max(stall_factor * l, stall_factor)

    while ledger.n_active < l:
        iterations += 1

        best_v, best_b, best_vac = 0, 0, -1
        for v in range(n_vars):
            vacancy = marginals.freqs[v] - counts[v]
            b = int(np.argmax(vacancy))
            if vacancy[b] > best_vac:
                best_v, best_b, best_vac = v, b, int(vacancy[b])

        pool = pools[best_v][best_b]
        if pool.size > 0:
            seed_id = int(pool[rng.integers(pool.size)])
            if not needs_kernel:
                y = X[seed_id].copy()
            else:
                neighbors = index.ids[seed_id]
                picks = neighbors if m - 1 == k else neighbors[rng.permutation(k)[: m - 1]]
                kcs = np.vstack([Xw[seed_id][np.newaxis, :], Xw[picks]])
                y = _rex_draw_original(kcs, rng, transform)
        else:
            seed = mins + spans * rng.random(d)
            lo, hi = marginals.edges[best_v][best_b], marginals.edges[best_v][best_b + 1]
            seed[var_cols[best_v]] = lo + (hi - lo) * rng.random()
            if not needs_kernel:
                y = seed
            else:
                seed_w = whiten_apply(transform, seed[np.newaxis, :])[0]
                ids, _ = query_neighbors(Xw, seed_w, k)
                picks = ids if m - 1 == k else ids[rng.permutation(k)[: m - 1]]
                kcs = np.vstack([seed_w[np.newaxis, :], Xw[picks]])
                y = _rex_draw_original(kcs, rng, transform)

        if round_integers:
            y = _round_half_away(y)

        bins = []
        in_range = True
        for v, col in enumerate(var_cols):
            b = int(marginals.bin_of(v, np.asarray([y[col]]))[0])
            if b < 0:
                in_range = False
                break
            bins.append(b)

        if in_range:
            ledger.add(y, tuple(bins))
            for v, b in enumerate(bins):
                counts[v][b] += 1
            # Drain any bin the new point overfilled; eviction decrements the
            # victim's counts across all variables, so counts only go down.
            for v, b in enumerate(bins):
                if counts[v][b] > marginals.freqs[v][b]:
                    bucket = ledger.members[v][b]
                    victim = bucket[rng.integers(len(bucket))]
                    for vv, bb in enumerate(ledger.point_bins[victim]):
                        counts[vv][bb] -= 1
                    ledger.remove(victim)

        if ledger.n_active > best_fill:
            best_fill = ledger.n_active
            stall = 0
        else:
            stall += 1
            if stall >= cap:
                deficits = {
                    str(marginals.names[v]): int((marginals.freqs[v] - counts[v]).sum())
                    for v in range(n_vars)
                }
                raise StallLimit(
                    f"no net progress for {stall} iterations "
                    f"({ledger.n_active}/{l} points placed)",
                    partial=ledger.survivors(d),
                    diagnostics={"iterations": iterations, "deficits": deficits},
                )

    return ledger.survivors(d)


def _rex_draw_original(kcs, rng, transform):
    y_w = rex_sample(kcs, rng)
    return whiten_invert(transform, y_w[np.newaxis, :])[0]


# ---------------------------------------------------------------------------
# Likelihood-optimized crossover kernel baseline
# ---------------------------------------------------------------------------


@dataclass
class KmModel:
    """L fixed kernel construction sets selected by log-likelihood ascent."""

    kcss: np.ndarray   # (L, m) int64 training-point ids
    loglik: float
    iterations: int = 0
    accepted: int = 0
    history: list = field(default_factory=list)  # initial + accepted logliks


def km_loglik(X: np.ndarray, kcss: np.ndarray, ridge: float = 0.0) -> float:
    """Training log-likelihood of the mixture, recomputed from scratch."""
    X = np.asarray(X, dtype=np.float64)
    cols = [_kcs_column(X, X[ids], ridge) for ids in kcss]
    log_mix = np.logaddexp.reduce(np.stack(cols, axis=1), axis=1) - math.log(len(kcss))
    return float(log_mix.sum())


def _kcs_column(X, kcs_points, ridge):
    # Trace-scaled fallback ridge for finite-precision near-singularity;
    # m >= d+1 makes the covariance generically nonsingular.
    try:
        return rex_log_density(X, kcs_points, ridge=ridge)
    except SingularSigma:
        stats = kcs_stats(kcs_points)
        bump = 1e-9 * float(np.trace(stats.sigma)) / kcs_points.shape[1]
        if bump <= 0.0:
            raise
        return rex_log_density(X, kcs_points, ridge=ridge + bump)


def km_fit(
    X: np.ndarray,
    L: int,
    m: int,
    rng: np.random.Generator,
    stall_limit: int = 10_000,
    ridge: float = 0.0,
    move: str = "whole",
) -> KmModel:
    """Hill-climb the choice of L kernel construction sets of size m.

    Starts from a uniform-random assignment; per iteration one set is redrawn
    (the whole set by default, a single member with ``move="single"``) and
    the move is kept iff the training log-likelihood strictly increases.
    Terminates after ``stall_limit`` consecutive non-improving iterations.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n == 0:
        raise EmptySample("training sample is empty")
    if m < d + 1:
        raise BadParams(f"need m >= d+1 = {d + 1} for an evaluable density, got m = {m}")
    if L < 1:
        raise BadParams(f"need L >= 1, got {L}")
    if n < m:
        raise BadParams(f"need n >= m, got n = {n}, m = {m}")
    if move not in ("whole", "single"):
        raise BadParams(f"unknown move kind {move!r}")

    kcss = np.stack([rng.permutation(n)[:m] for _ in range(L)])
    log_kernel = np.stack([_kcs_column(X, X[ids], ridge) for ids in kcss], axis=1)
    log_l = math.log(L)

    def total(matrix):
        return float((np.logaddexp.reduce(matrix, axis=1) - log_l).sum())

    loglik = total(log_kernel)
    history = [loglik]
    stall = 0
    accepted = 0
    iterations = 0
    while stall < stall_limit:
        iterations += 1
        j = int(rng.integers(L))
        if move == "whole":
            candidate = rng.permutation(n)[:m]
        else:
            candidate = kcss[j].copy()
            slot = int(rng.integers(m))
            replacement = int(rng.integers(n))
            while replacement in candidate:
                replacement = int(rng.integers(n))
            candidate[slot] = replacement
        new_col = _kcs_column(X, X[candidate], ridge)
        old_col = log_kernel[:, j].copy()
        log_kernel[:, j] = new_col
        new_loglik = total(log_kernel)
        if new_loglik > loglik:
            kcss[j] = candidate
            loglik = new_loglik
            history.append(loglik)
            accepted += 1
            stall = 0
        else:
            log_kernel[:, j] = old_col
            stall += 1
    return KmModel(
        kcss=kcss, loglik=loglik, iterations=iterations, accepted=accepted, history=history
    )


def km_synth(
    model: KmModel,
    X: np.ndarray,
    l: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw l points: choose one of the L sets uniformly, then one REX draw."""
    X = np.asarray(X, dtype=np.float64)
    out = np.empty((l, X.shape[1]))
    if l == 0:
        return out
    assignment = rng.integers(0, model.kcss.shape[0], size=l)
    for j, ids in enumerate(model.kcss):
        mask = assignment == j
        count = int(mask.sum())
        if count:
            out[mask] = rex_samples(X[ids], count, rng)
    return out
