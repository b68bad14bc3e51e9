"""
Principal components by block power iteration
"""
from dataclasses import dataclass
from typing import Optional
import logging

import numpy as np

logger = logging.getLogger(__name__)

MIN_POINTS = 3


@dataclass
class PCAResult:
    components: np.ndarray  # d x k, orthonormal columns
    coordinates: np.ndarray  # n x k
    eigenvalues: np.ndarray
    mean: np.ndarray
    iterations: int
    converged: bool


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive"""
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def power_iteration_pca(
    features: np.ndarray, k: int = 2, tol: float = 1e-9, max_iter: int = 1000, seed: int = 0
) -> PCAResult:
    """Top-k eigenvectors of the covariance via subspace iteration with Rayleigh-Ritz"""
    x = np.asarray(features, dtype=np.float64)
    n, d = x.shape
    k = min(k, d)
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / max(n - 1, 1)

    q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((d, k)))
    eigenvalues = np.zeros(k)
    converged = False
    iterations = 0
    scale = max(float(np.abs(cov).max()), 1.0)
    for iterations in range(1, max_iter + 1):
        q, _ = np.linalg.qr(cov @ q)
        ritz = q.T @ cov @ q
        values, vectors = np.linalg.eigh((ritz + ritz.T) / 2.0)
        order = np.argsort(values)[::-1]
        eigenvalues = values[order]
        q = q @ vectors[:, order]
        residual = np.linalg.norm(cov @ q - q * eigenvalues, axis=0).max()
        if residual < tol * scale:
            converged = True
            break
    if not converged:
        logger.warning(f"Power iteration did not reach tolerance {tol} in {max_iter} iterations")

    q = _fix_signs(q)
    return PCAResult(
        components=q,
        coordinates=centered @ q,
        eigenvalues=eigenvalues,
        mean=mean,
        iterations=iterations,
        converged=converged,
    )


def project_2d(features: np.ndarray, seed: int = 0) -> Optional[np.ndarray]:
    """n x 2 PCA coordinates, or None when there are fewer than three points"""
    features = np.asarray(features, dtype=np.float64)
    if features.shape[0] < MIN_POINTS:
        return None
    coords = power_iteration_pca(features, k=2, seed=seed).coordinates
    if coords.shape[1] < 2:
        coords = np.hstack([coords, np.zeros((coords.shape[0], 2 - coords.shape[1]))])
    return coords
