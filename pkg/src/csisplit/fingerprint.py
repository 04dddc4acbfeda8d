"""Total variation distance between per-node empirical fingerprint measures.

The fingerprint statistic is the amplitude (modulus) of each node's
predictable-component time series; a pair of nodes is compared through
histograms on a shared equal-width grid spanning the pooled sample range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import NodeGeometry, neighbor_pairs

DEFAULT_BINS = 32


@dataclass(frozen=True)
class EmpiricalMeasure:
    bin_edges: np.ndarray
    probs: np.ndarray
    clipped: int = 0  # samples outside the grid, counted into the end bins

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=np.float64)
        probs = np.asarray(self.probs, dtype=np.float64)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be a strictly increasing 1-D grid")
        if probs.size != edges.size - 1:
            raise ValueError("probs length must be len(edges) - 1")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError("probs must be nonnegative and sum to 1")
        edges.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "probs", probs)


@dataclass(frozen=True)
class FingerprintReport:
    pairs: list[tuple[int, int]]
    pair_tvd: np.ndarray
    avg_tvd: float


def histogram(samples, edges) -> EmpiricalMeasure:
    """Normalized bin counts; out-of-range samples are clipped to the end bins."""
    samples = np.asarray(samples, dtype=np.float64).ravel()
    edges = np.asarray(edges, dtype=np.float64)
    if samples.size < 1:
        raise ValueError("need at least one sample")
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError("need at least two bin edges")
    if np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must be strictly increasing")
    clipped = int(np.sum(samples < edges[0]) + np.sum(samples > edges[-1]))
    clamped = np.clip(samples, edges[0], edges[-1])
    counts, _ = np.histogram(clamped, bins=edges)
    return EmpiricalMeasure(bin_edges=edges, probs=counts / samples.size, clipped=clipped)


def tvd(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """Half the L1 distance between two measures on the same grid."""
    if mu.bin_edges.shape != nu.bin_edges.shape or not np.array_equal(mu.bin_edges, nu.bin_edges):
        raise ValueError("measures live on different bin grids")
    return float(0.5 * np.sum(np.abs(mu.probs - nu.probs)))


def _shared_edges(a: np.ndarray, b: np.ndarray, bins: int) -> np.ndarray:
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if hi <= lo:  # degenerate pooled range, widen so the grid is valid
        hi = lo + max(abs(lo), 1.0) * 1e-12 + 1e-300
    return np.linspace(lo, hi, bins + 1)


def pairwise_tvd(samples_a, samples_b, bins: int = DEFAULT_BINS) -> float:
    """TVD between two sample sets on a shared equal-width grid."""
    a = np.asarray(samples_a, dtype=np.float64).ravel()
    b = np.asarray(samples_b, dtype=np.float64).ravel()
    edges = _shared_edges(a, b, bins)
    return tvd(histogram(a, edges), histogram(b, edges))


def avg_neighbor_tvd(
    fingerprints: np.ndarray,
    geom: NodeGeometry,
    k: int | None = None,
    bins: int = DEFAULT_BINS,
) -> FingerprintReport:
    """Mean TVD over all (node, nearest-neighbor) pairs.

    ``fingerprints`` holds one amplitude sample set per node: shape
    (samples, n). Each pair gets its own shared 'bins'-bin grid over the
    pooled min/max.
    """
    fp = np.asarray(fingerprints, dtype=np.float64)
    pairs = neighbor_pairs(geom, geom.k if k is None else k)
    vals = np.array([pairwise_tvd(fp[:, i], fp[:, j], bins=bins) for i, j in pairs])
    vals.setflags(write=False)
    return FingerprintReport(pairs=pairs, pair_tvd=vals, avg_tvd=float(np.mean(vals)))
