"""Kernel independence testing between node observation sequences.

The d-variable Hilbert-Schmidt independence criterion is estimated from
per-variable Gaussian Gram matrices K^l (median-heuristic bandwidths):

    stat = (1/M^2)  sum_ij prod_l K^l_ij
         + (1/M^2d) prod_l sum_ij K^l_ij
         - (2/M^(d+1)) sum_i prod_l (sum_j K^l_ij)

The critical value at level alpha comes from B Monte-Carlo re-samplings
without replacement (each variable's sample order permuted independently),
sorted ascending, indexed at ceil((B+1)(1-alpha)) plus the count of
replicates tied with the observed statistic, clamped to B.

The normalized dependence level divides the statistic by the critical
value and gates with the rejection indicator: zero whenever the test does
not reject, stat/CV otherwise.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import NodeGeometry, nearest_neighbors


@dataclass(frozen=True)
class DependenceReport:
    statistic: float
    critical_value: float
    delta_bar: float
    alpha: float
    b: int
    reject: bool
    raw_ratio: float  # statistic / CV without the indicator gate
    degenerate_variables: tuple[int, ...] = ()


def gaussian_gram_1d(x: np.ndarray, sigma: float | None = None) -> tuple[np.ndarray, float, bool]:
    """Gram matrix K_ij = exp(-(x_i - x_j)^2 / sigma^2) for a scalar sequence.

    Median-heuristic bandwidth sigma = sqrt(med(offdiag squared dists) / 2)
    when not supplied. A constant sequence has no usable bandwidth; its Gram
    is the all-ones limit and the degenerate flag is set.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size < 2:
        raise ValueError("need at least 2 observations")
    d2 = (x[:, None] - x[None, :]) ** 2
    if sigma is None:
        off = d2[np.triu_indices(x.size, k=1)]
        med = float(np.median(off))
        if med == 0.0:
            pos = off[off > 0]
            if pos.size == 0:  # constant sequence
                return np.ones_like(d2), math.nan, True
            med = float(np.median(pos))  # >50% duplicates: fall back to positive dists
        sigma = math.sqrt(med / 2.0)
    if sigma <= 0:
        raise ValueError("bandwidth must be positive")
    return np.exp(-d2 / (sigma * sigma)), float(sigma), False


def _as_seed_sequence(seed) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


def _prepare_grams(variables, sigmas=None):
    if len(variables) < 2:
        raise ValueError("need d >= 2 variables")
    arrs = [np.asarray(v, dtype=np.float64).ravel() for v in variables]
    m = arrs[0].size
    if m < 2 or any(a.size != m for a in arrs):
        raise ValueError("all variables need the same length M >= 2")
    if sigmas is None:
        sigmas = [None] * len(arrs)
    grams, degenerate = [], []
    for idx, (a, s) in enumerate(zip(arrs, sigmas)):
        k, _, degen = gaussian_gram_1d(a, s)
        grams.append(k)
        if degen:
            degenerate.append(idx)
    return grams, tuple(degenerate)


def _statistic_from_grams(grams: list[np.ndarray]) -> float:
    m = grams[0].shape[0]
    d = len(grams)
    prod = grams[0].copy()
    for g in grams[1:]:
        prod *= g
    term1 = prod.sum() / m**2
    term2 = math.prod(float(g.sum()) for g in grams) / float(m) ** (2 * d)
    rowprod = grams[0].sum(axis=1)
    for g in grams[1:]:
        rowprod = rowprod * g.sum(axis=1)
    term3 = 2.0 * rowprod.sum() / float(m) ** (d + 1)
    return float(term1 + term2 - term3)


def dhsic_statistic(variables, sigmas=None) -> float:
    """Estimator of the d-variable HSIC from scalar observation sequences."""
    grams, _ = _prepare_grams(variables, sigmas)
    return _statistic_from_grams(grams)


def permutation_statistics(variables, b: int, seed, sigmas=None, threads: int = 1) -> np.ndarray:
    """B re-sampled statistics; replicate r uses its own RNG stream so the
    result is independent of evaluation order."""
    grams, _ = _prepare_grams(variables, sigmas)
    m = grams[0].shape[0]
    children = _as_seed_sequence(seed).spawn(b)

    def one(child) -> float:
        rng = np.random.default_rng(child)
        permuted = []
        for g in grams:
            p = rng.permutation(m)
            permuted.append(g[np.ix_(p, p)])
        return _statistic_from_grams(permuted)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(one, children))
    else:
        out = [one(c) for c in children]
    return np.asarray(out)


def _cv_index(b: int, alpha: float, ties: int) -> int:
    """1-based order-statistic index, clamped to B."""
    idx = math.ceil((b + 1) * (1.0 - alpha)) + ties
    if idx > b:
        warnings.warn(f"critical-value index {idx} exceeds B={b}; clamping", RuntimeWarning)
        idx = b
    return idx


def critical_value(variables, alpha: float, b: int, seed, sigmas=None, threads: int = 1) -> float:
    """Monte-Carlo critical value of the independence test."""
    if b < 100:
        raise ValueError("need at least 100 permutations")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    observed = dhsic_statistic(variables, sigmas)
    stats = permutation_statistics(variables, b, seed, sigmas, threads)
    ties = int(np.sum(stats == observed))
    return float(np.sort(stats)[_cv_index(b, alpha, ties) - 1])


def delta_bar(statistic: float, cv: float) -> float:
    """statistic / cv when the test rejects (statistic > cv), else 0."""
    if cv <= 0:
        raise ValueError("critical value must be positive")
    return statistic / cv if statistic > cv else 0.0


def dhsic_test(variables, alpha: float = 0.05, b: int = 1000, seed=0, sigmas=None, threads: int = 1) -> DependenceReport:
    """Full test: statistic, critical value, rejection and normalized level."""
    if b < 100:
        raise ValueError("need at least 100 permutations")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    grams, degenerate = _prepare_grams(variables, sigmas)
    observed = _statistic_from_grams(grams)
    stats = permutation_statistics(variables, b, seed, sigmas, threads)
    ties = int(np.sum(stats == observed))
    cv = float(np.sort(stats)[_cv_index(b, alpha, ties) - 1])
    reject = observed > cv
    ratio = observed / cv if cv > 0 else math.inf
    return DependenceReport(
        statistic=observed,
        critical_value=cv,
        delta_bar=ratio if reject else 0.0,
        alpha=alpha,
        b=b,
        reject=reject,
        raw_ratio=ratio,
        degenerate_variables=degenerate,
    )


def pearson_cc(a, b) -> float:
    """Sample Pearson correlation of two equal-length sequences."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size or a.size < 2:
        raise ValueError("need two equal-length sequences with >= 2 samples")
    sa, sb = a.std(), b.std()
    if sa == 0.0 or sb == 0.0:
        raise ValueError("zero-variance sequence")
    return float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb))


def avg_neighbor_cc(view: np.ndarray, geom: NodeGeometry, k: int | None = None) -> float:
    """Mean |column|-wise Pearson CC over all (node, k-nearest-neighbor) pairs."""
    view = np.asarray(view, dtype=np.float64)
    kk = geom.k if k is None else k
    vals = [
        pearson_cc(view[:, i], view[:, j])
        for i in range(geom.n)
        for j in nearest_neighbors(geom, i, kk)
    ]
    return float(np.mean(vals))


def select_delta_pairs(geom: NodeGeometry, pairs: int) -> list[tuple[int, int]]:
    """Deterministic evenly-spaced (node, nearest-neighbor) pairs for the
    averaged dependence metric."""
    pairs = min(pairs, geom.n)
    nodes = np.unique(np.linspace(0, geom.n - 1, pairs).round().astype(int))
    return [(int(i), int(nearest_neighbors(geom, int(i), 1)[0])) for i in nodes]


def avg_neighbor_delta_bar(
    view: np.ndarray,
    geom: NodeGeometry,
    pairs: int = 16,
    alpha: float = 0.05,
    b: int = 1000,
    seed=0,
    threads: int = 1,
) -> tuple[float, list[DependenceReport]]:
    """Average normalized dependence over (node, nearest-neighbor) pairs.

    Each pair is tested as a d=2 group of real-view column sequences with
    its own RNG stream.
    """
    view = np.asarray(view, dtype=np.float64)
    groups = select_delta_pairs(geom, pairs)
    children = _as_seed_sequence(seed).spawn(len(groups))
    reports = [
        dhsic_test([view[:, i], view[:, j]], alpha=alpha, b=b, seed=child, threads=threads)
        for (i, j), child in zip(groups, children)
    ]
    return float(np.mean([r.delta_bar for r in reports])), reports
