"""Kernel-PCA decomposition of complex CSI columns.

The Gram matrix uses a Gaussian kernel on complex M-vectors that
conjugates its second argument,

    K_ij = exp(-||h_i - conj(h_j)||^2 / (2 sigma^2)),

which is symmetric for any complex input because norms are invariant
under conjugation (||h_j - conj(h_i)|| = ||h_i - conj(h_j)||). The matrix
is nevertheless symmetrized explicitly and the asymmetry norm reported,
so any future kernel variant stays eigensolver-safe. A --kernel-variant
switch selects the plain ||h_i - h_j|| kernel for comparison.

Predictable components are rebuilt by kernel ridge regression from the
projection scores (no iterative pre-image); the unpredictable part is the
exact residual. No tail-truncation denoising happens on this path.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import CsiMatrix

KERNEL_VARIANTS = ("conjugate", "standard")

#: eigenvalues of the scaled Gram below this are treated as numerically zero
EIGENVALUE_FLOOR = 1e-12


@dataclass(frozen=True)
class GramMatrix:
    k: np.ndarray
    bandwidth_sigma: float
    asymmetry_norm: float
    variant: str = "conjugate"

    def __post_init__(self):
        arr = np.asarray(self.k, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "k", arr)


@dataclass(frozen=True)
class KpcaModel:
    centered_gram: np.ndarray
    alphas: np.ndarray  # (n, d_hat), column i = V_i / sqrt(lambda_i)
    eigenvalues: np.ndarray  # descending, of the (1/N)-scaled problem
    scores: np.ndarray  # (d_hat, n) projections of the training columns
    train_columns: np.ndarray  # (m, n) complex columns the model was fitted on
    gram: GramMatrix


@dataclass(frozen=True)
class KpcaDiagnostics:
    eigenvalues: np.ndarray
    asymmetry_norm: float
    bandwidth_sigma: float
    score_bandwidth: float
    gamma: float
    condition_estimate: float


def _pairwise_sq_dists(columns: np.ndarray, variant: str) -> np.ndarray:
    h = np.asarray(columns, dtype=np.complex128)
    norms = np.sum(np.abs(h) ** 2, axis=0).real
    if variant == "conjugate":
        cross = (h.T @ h).real  # Re(h_i . h_j) = <h_i, conj(h_j)>
    elif variant == "standard":
        cross = (h.conj().T @ h).real
    else:
        raise ValueError(f"kernel variant must be one of {KERNEL_VARIANTS}")
    d2 = norms[:, None] + norms[None, :] - 2.0 * cross
    return np.maximum(d2, 0.0)


def median_bandwidth(sq_dists: np.ndarray) -> float:
    """sigma = sqrt(median of off-diagonal squared distances / 2).

    Self-distances are excluded so duplicated points do not bias the
    bandwidth low; an all-zero median means the inputs are effectively
    identical and no bandwidth exists.
    """
    n = sq_dists.shape[0]
    off = sq_dists[np.triu_indices(n, k=1)]
    med = float(np.median(off))
    if med <= 0.0:
        raise ValueError("degenerate bandwidth: median pairwise distance is zero")
    return math.sqrt(med / 2.0)


def gaussian_gram(columns: np.ndarray, sigma: float | None = None, variant: str = "conjugate") -> GramMatrix:
    """Gram matrix of the complex Gaussian kernel over CSI columns."""
    h = np.asarray(columns, dtype=np.complex128)
    if h.ndim != 2 or h.shape[1] < 2:
        raise ValueError("need a (m, n) column matrix with n >= 2")
    d2 = _pairwise_sq_dists(h, variant)
    if sigma is None:
        sigma = median_bandwidth(d2)
    if sigma <= 0:
        raise ValueError("bandwidth must be positive")
    k = np.exp(-d2 / (2.0 * sigma * sigma))
    asym = float(np.linalg.norm(k - k.T))
    k = 0.5 * (k + k.T)
    return GramMatrix(k=k, bandwidth_sigma=float(sigma), asymmetry_norm=asym, variant=variant)


def center_gram(k: np.ndarray) -> np.ndarray:
    """K - (1/N) 1K - (1/N) K1 + (1/N^2) 1K1; zero row/column sums after."""
    k = np.asarray(k, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError("Gram matrix must be square")
    row = k.mean(axis=0, keepdims=True)
    col = k.mean(axis=1, keepdims=True)
    return k - row - col + k.mean()


def fit_kpca(csi: CsiMatrix, d_hat: int, sigma: float | None = None, variant: str = "conjugate") -> KpcaModel:
    """Solve the centered-Gram eigenproblem K~ a = N lambda a and retain the
    top d_hat components as scaled eigenvectors and projection scores."""
    h = csi.data
    n = h.shape[1]
    if not 1 <= d_hat <= n - 1:
        raise ValueError(f"d_hat must lie in [1, {n - 1}]")
    gram = gaussian_gram(h, sigma=sigma, variant=variant)
    centered = center_gram(gram.k)
    evals, evecs = np.linalg.eigh(centered)
    order = np.argsort(evals)[::-1]
    lambdas = np.clip(evals[order] / n, 0.0, None)
    vectors = evecs[:, order]
    # deterministic sign: first nonzero entry positive
    for i in range(vectors.shape[1]):
        nz = np.nonzero(np.abs(vectors[:, i]) > 1e-12)[0]
        if nz.size and vectors[nz[0], i] < 0:
            vectors[:, i] *= -1.0
    rank = int(np.sum(lambdas > EIGENVALUE_FLOOR))
    if d_hat > rank:
        warnings.warn(f"d_hat={d_hat} exceeds numerical rank {rank}; truncating", RuntimeWarning)
        d_hat = rank
    alphas = vectors[:, :d_hat] / np.sqrt(lambdas[:d_hat])[None, :]
    scores = alphas.T @ centered
    return KpcaModel(
        centered_gram=centered,
        alphas=alphas,
        eigenvalues=lambdas,
        scores=scores,
        train_columns=h.copy(),
        gram=gram,
    )


def default_gamma(k_scores: np.ndarray) -> float:
    """Scale-aware ridge default: 1e-3 * trace(K_Y) / N."""
    return 1e-3 * float(np.trace(k_scores)) / k_scores.shape[0]


def reconstruct_predictable(
    model: KpcaModel, csi: CsiMatrix, gamma: float | None = None
) -> tuple[CsiMatrix, KpcaDiagnostics]:
    """Kernel ridge reconstruction of the predictable part.

    H_hat = B K_Y with B = H (K_Y + gamma I)^-1, where K_Y is the real
    Gaussian Gram over the model's score columns (its own median
    bandwidth). Solved as an SPD linear system, never by explicit inverse.
    """
    h = csi.data
    if h.shape != model.train_columns.shape:
        raise ValueError("matrix shape differs from the fitted columns")
    y = model.scores
    d2 = (
        np.sum(y * y, axis=0)[:, None]
        + np.sum(y * y, axis=0)[None, :]
        - 2.0 * (y.T @ y)
    )
    d2 = np.maximum(d2, 0.0)
    score_sigma = median_bandwidth(d2)
    k_scores = np.exp(-d2 / (2.0 * score_sigma * score_sigma))
    if gamma is None:
        gamma = default_gamma(k_scores)
    if gamma <= 0:
        raise ValueError("ridge gamma must be positive")
    regularized = k_scores + gamma * np.eye(k_scores.shape[0])
    eigs = np.linalg.eigvalsh(regularized)
    condition = float(eigs[-1] / eigs[0]) if eigs[0] > 0 else math.inf
    if condition > 1e12:
        warnings.warn(f"ill-conditioned ridge system (condition ~ {condition:.3g})", RuntimeWarning)
    mapping = linalg.solve(regularized, k_scores, assume_a="pos")  # (K_Y + gI)^-1 K_Y
    predictable = h @ mapping
    diag = KpcaDiagnostics(
        eigenvalues=model.eigenvalues,
        asymmetry_norm=model.gram.asymmetry_norm,
        bandwidth_sigma=model.gram.bandwidth_sigma,
        score_bandwidth=score_sigma,
        gamma=float(gamma),
        condition_estimate=condition,
    )
    return CsiMatrix(predictable, direction=csi.direction, snr_db=csi.snr_db), diag


def decompose_kpca(
    model: KpcaModel, csi: CsiMatrix, gamma: float | None = None
) -> tuple[CsiMatrix, CsiMatrix, KpcaDiagnostics]:
    """Predictable part via ridge reconstruction plus the exact residual."""
    predictable, diag = reconstruct_predictable(model, csi, gamma=gamma)
    residual = CsiMatrix(csi.data - predictable.data, direction=csi.direction, snr_db=csi.snr_db)
    return predictable, residual, diag
