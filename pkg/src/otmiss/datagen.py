"""Seeded synthetic generators for the experiment harness.

The exact generators behind the reference experiments are not recoverable, so
these are documented stand-ins: experiments compare methods on the same draws
and report relative quantities, which is what the acceptance checks use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .moments import GaussianSummary
from .rng import child_rng

__all__ = [
    "random_gaussian",
    "TwoClusterDistribution",
    "make_two_cluster_distribution",
    "random_gaussian_pair",
    "sample_gaussian",
    "two_cluster_classes",
    "two_moons_lifted",
    "clinical_like_table",
]


def random_gaussian(
    d: int,
    rng: np.random.Generator,
    eig_range: tuple[float, float] = (0.5, 3.0),
    mean_scale: float = 1.0,
    diagonal: bool = False,
) -> GaussianSummary:
    """Random PD covariance with eigenvalues uniform in ``eig_range`` (rotated
    by a Haar orthogonal matrix unless ``diagonal``) and N(0, mean_scale^2)
    mean."""
    eigs = rng.uniform(*eig_range, size=d)
    if diagonal:
        cov = np.diag(eigs)
    else:
        q, _ = np.linalg.qr(rng.normal(size=(d, d)))
        cov = (q * eigs) @ q.T
        cov = (cov + cov.T) / 2.0
    mean = rng.normal(scale=mean_scale, size=d)
    return GaussianSummary(mean, cov, psd_certified=True)


def random_gaussian_pair(d: int, seed: int, diagonal: bool = False):
    rng = child_rng(seed, 0)
    return random_gaussian(d, rng, diagonal=diagonal), random_gaussian(d, rng, diagonal=diagonal)


def sample_gaussian(summary: GaussianSummary, n: int, rng: np.random.Generator) -> np.ndarray:
    w, v = np.linalg.eigh(summary.cov)
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
    return summary.mean + rng.normal(size=(n, summary.dim)) @ root


@dataclass(frozen=True)
class TwoClusterDistribution:
    """Binary class-conditional mixture: two Gaussian clusters per class in a
    latent space, lifted to the ambient dimension by a fixed linear map plus
    small isotropic noise (so samples are approximately low rank).

    The two classes sit on opposite sides of a separating direction, which
    keeps a linear classifier informative.
    """

    centers_neg: np.ndarray  # (2, latent_dim)
    centers_pos: np.ndarray
    lift: np.ndarray  # (latent_dim, d)
    cluster_std: float
    noise: float

    @property
    def dim(self) -> int:
        return self.lift.shape[1]

    def sample(self, n_per_class: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """(X, labels in {-1, +1}); rows grouped by class, negatives first."""
        latent_dim = self.lift.shape[0]
        X = []
        labels = []
        for cls, centers in ((-1, self.centers_neg), (1, self.centers_pos)):
            assign = rng.integers(0, 2, size=n_per_class)
            latent = centers[assign] + rng.normal(scale=self.cluster_std, size=(n_per_class, latent_dim))
            pts = latent @ self.lift + rng.normal(scale=self.noise, size=(n_per_class, self.dim))
            X.append(pts)
            labels.append(np.full(n_per_class, cls))
        return np.vstack(X), np.concatenate(labels)


def make_two_cluster_distribution(
    d: int,
    rng: np.random.Generator,
    latent_dim: int = 2,
    class_sep: float = 2.0,
    center_spread: float = 1.0,
    cluster_std: float = 1.0,
    noise: float = 0.05,
) -> TwoClusterDistribution:
    direction = rng.normal(size=latent_dim)
    direction /= np.linalg.norm(direction)
    centers_neg = -class_sep * direction + rng.normal(scale=center_spread, size=(2, latent_dim))
    centers_pos = class_sep * direction + rng.normal(scale=center_spread, size=(2, latent_dim))
    lift = rng.normal(size=(latent_dim, d)) / np.sqrt(latent_dim)
    return TwoClusterDistribution(centers_neg, centers_pos, lift, cluster_std, noise)


def two_cluster_classes(
    n_per_class: int,
    d: int,
    rng: np.random.Generator,
    **kwargs,
) -> tuple[np.ndarray, np.ndarray]:
    """One draw from a fresh two-cluster distribution (see
    :func:`make_two_cluster_distribution` for the keyword knobs)."""
    return make_two_cluster_distribution(d, rng, **kwargs).sample(n_per_class, rng)


def two_moons_lifted(
    n_per_class: int,
    rng: np.random.Generator,
    noise: float = 0.08,
    d_out: int = 10,
) -> tuple[np.ndarray, np.ndarray]:
    """Two interleaving half circles in 2-D, pushed to d_out dimensions by a
    random linear map (rank-2 structure by construction)."""
    t = rng.uniform(0, np.pi, size=n_per_class)
    upper = np.column_stack([np.cos(t), np.sin(t)])
    t = rng.uniform(0, np.pi, size=n_per_class)
    lower = np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)])
    upper += rng.normal(scale=noise, size=upper.shape)
    lower += rng.normal(scale=noise, size=lower.shape)
    lift = rng.normal(size=(2, d_out))
    return upper @ lift, lower @ lift


def clinical_like_table(
    n_pos: int = 268,
    n_neg: int = 500,
    d: int = 8,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Synthetic stand-in for an 8-feature two-group clinical table.

    Positive-group features are shifted and rescaled relative to the negative
    group; all features are positive-valued (lognormal-like)."""
    rng = child_rng(seed, 7)
    base_cov = random_gaussian(d, rng, eig_range=(0.3, 1.5)).cov
    root = np.linalg.cholesky(base_cov + 1e-9 * np.eye(d))
    shift = rng.uniform(0.3, 1.0, size=d)
    neg = np.exp(0.4 * rng.normal(size=(n_neg, d)) @ root.T)
    pos = np.exp(0.4 * rng.normal(size=(n_pos, d)) @ root.T + shift)
    X = np.vstack([pos, neg])
    labels = np.concatenate([np.ones(n_pos), -np.ones(n_neg)])
    return X, labels
