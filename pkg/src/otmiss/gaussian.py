"""Bures-Wasserstein distances (plain, debiased, entropic), linear Monge maps,
and the zero-imputation bias lower bound.

All distances are squared 2-Wasserstein values.  Estimated covariances can be
indefinite at finite sample size, so matrix square roots and inversions apply
an eigenvalue floor of ``1e-10 * ||S||_op``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import MaskedDataset
from .moments import GaussianSummary, debiased_covariance, debiased_mean, empirical_summary

__all__ = [
    "AffineMap",
    "BwReport",
    "psd_sqrt",
    "bures_wasserstein",
    "debiased_bw",
    "debiased_summary",
    "entropic_gaussian_ot",
    "linear_monge_map",
    "debiased_monge_map",
    "na_bias_lower_bound",
]

EIG_FLOOR_REL = 1e-10
NEGATIVE_CLIP = 1e-8


@dataclass(frozen=True)
class BwReport:
    """Squared Bures-Wasserstein distance with its three-term breakdown:
    ``squared_distance = mean_term + trace_term - 2 * cross_term`` (clipped at
    0 when roundoff makes it negative by less than 1e-8)."""

    squared_distance: float
    mean_term: float
    trace_term: float
    cross_term: float

    def to_json(self, path: str | Path | None = None) -> str:
        payload = json.dumps(
            {
                "squared_distance": self.squared_distance,
                "mean_term": self.mean_term,
                "trace_term": self.trace_term,
                "cross_term": self.cross_term,
            }
        )
        if path is not None:
            Path(path).write_text(payload, encoding="utf-8")
        return payload


@dataclass(frozen=True)
class AffineMap:
    """Map ``T(z) = offset_target + linear @ (z * input_rescale - offset_source)``.

    ``linear`` is symmetric PSD.  ``input_rescale`` is None for maps that
    consume clean points; debiased maps built from masked data set it to the
    inverse observation probabilities so that zero-imputed points are debiased
    on the way in.
    """

    linear: np.ndarray
    offset_target: np.ndarray
    offset_source: np.ndarray
    input_rescale: np.ndarray | None = None

    def __post_init__(self):
        L = np.asarray(self.linear, dtype=float)
        if np.abs(L - L.T).max(initial=0.0) > 1e-10 * max(1.0, np.abs(L).max(initial=1.0)):
            raise ValueError("linear part must be symmetric to 1e-10")
        object.__setattr__(self, "linear", (L + L.T) / 2.0)

    def apply(self, points: np.ndarray) -> np.ndarray:
        z = np.asarray(points, dtype=float)
        if self.input_rescale is not None:
            z = z * self.input_rescale
        return self.offset_target + (z - self.offset_source) @ self.linear.T

    def inverse(self) -> "AffineMap":
        """Inverse of the affine part: maps target-space points back to
        (debiased) source coordinates.  Any input rescaling is dropped since
        masking is not invertible pointwise."""
        w, v = np.linalg.eigh(self.linear)
        if w[0] <= 0:
            raise ValueError("linear part is singular; map is not invertible")
        inv = (v / w) @ v.T
        return AffineMap((inv + inv.T) / 2.0, self.offset_source, self.offset_target)


def psd_sqrt(M: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Eigendecomposition square root of a symmetric PSD matrix.

    Eigenvalues in ``[-tol, 0)`` are treated as roundoff and clipped to 0; an
    eigenvalue below ``-tol`` signals a genuinely non-PSD input and raises.
    """
    M = np.asarray(M, dtype=float)
    scale = max(1.0, float(np.abs(M).max()) if M.size else 1.0)
    if np.abs(M - M.T).max(initial=0.0) > 1e-10 * scale:
        raise ValueError("matrix must be symmetric")
    w, v = np.linalg.eigh((M + M.T) / 2.0)
    if tol is None:
        tol = NEGATIVE_CLIP * max(float(w[-1]), 1.0)
    if w[0] < -tol:
        raise ValueError(f"matrix is not PSD: min eigenvalue {w[0]:.3e} < -{tol:.3e}")
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
    return (root + root.T) / 2.0


def _clipped_spectrum(cov: np.ndarray, tol_rel: float = NEGATIVE_CLIP):
    """eigh with small negatives clipped; raises on genuinely non-PSD input."""
    w, v = np.linalg.eigh(cov)
    tol = tol_rel * max(float(w[-1]), 1.0)
    if w[0] < -tol:
        raise ValueError(f"covariance is not PSD after projection tolerance (min eig {w[0]:.3e})")
    return np.clip(w, 0.0, None), v


def _cross_eigs(cov_a: np.ndarray, cov_b: np.ndarray) -> np.ndarray:
    """Eigenvalues of A^{1/2} B A^{1/2}, clipped at 0."""
    wa, va = _clipped_spectrum(cov_a)
    root_a = (va * np.sqrt(wa)) @ va.T
    inner = root_a @ cov_b @ root_a
    w = np.linalg.eigvalsh((inner + inner.T) / 2.0)
    return np.clip(w, 0.0, None)


def bures_wasserstein(a: GaussianSummary, b: GaussianSummary) -> BwReport:
    """Squared BW distance
    ``||m_a - m_b||^2 + tr(S_a + S_b) - 2 tr[(S_a^{1/2} S_b S_a^{1/2})^{1/2}]``.

    Identical summaries short-circuit to an exact 0.
    """
    if np.array_equal(a.mean, b.mean) and np.array_equal(a.cov, b.cov):
        t = float(np.trace(a.cov))
        return BwReport(0.0, 0.0, 2.0 * t, t)
    mean_term = float(np.sum((a.mean - b.mean) ** 2))
    trace_term = float(np.trace(a.cov) + np.trace(b.cov))
    cross_term = float(np.sqrt(_cross_eigs(a.cov, b.cov)).sum())
    value = mean_term + trace_term - 2.0 * cross_term
    if value < -NEGATIVE_CLIP:
        raise ValueError(f"negative squared distance {value:.3e} beyond clipping tolerance")
    return BwReport(max(value, 0.0), mean_term, trace_term, cross_term)


def debiased_summary(data: MaskedDataset) -> GaussianSummary:
    """Debiased mean + PSD-projected debiased covariance of a masked sample."""
    raw = debiased_covariance(data)
    return GaussianSummary(debiased_mean(data), raw.psd_projection().cov, psd_certified=True)


def debiased_bw(x: MaskedDataset, y: MaskedDataset) -> BwReport:
    """BW distance between the debiased summaries of two masked samples.

    With full masks (probs == 1) this is exactly the plug-in BW of the
    empirical moments.
    """
    return bures_wasserstein(debiased_summary(x), debiased_summary(y))


def entropic_gaussian_ot(a: GaussianSummary, b: GaussianSummary, eps: float) -> float:
    """Closed-form entropic OT between Gaussians.

    Convention: ``min_pi  E||x - y||^2 + eps * KL(pi | mu (x) nu)``, the value
    of which is

        ``||dm||^2 + tr(Sa) + tr(Sb) - tr(D)
          + (d*eps/2)(1 - log eps) + (eps/2) logdet(D + (eps/2) I)``

    with ``D = (4 Sa^{1/2} Sb Sa^{1/2} + (eps^2/4) I)^{1/2}``.  It decreases
    to the plain BW value as eps -> 0.  A discrete Sinkhorn value computed
    with the plain-entropy objective on uniform n x m marginals relates to
    this convention by the constant offset ``eps * log(n*m)`` (see
    ``discrete.OtSolution.value_kl_convention``).
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    cov_a = _floor_psd(a.cov)
    cov_b = _floor_psd(b.cov)
    d = a.dim
    mean_term = float(np.sum((a.mean - b.mean) ** 2))
    cross = _cross_eigs(cov_a, cov_b)
    d_eigs = np.sqrt(4.0 * cross + eps**2 / 4.0)
    value = (
        mean_term
        + float(np.trace(cov_a) + np.trace(cov_b))
        - float(d_eigs.sum())
        + d * eps / 2.0 * (1.0 - math.log(eps))
        + eps / 2.0 * float(np.log(d_eigs + eps / 2.0).sum())
    )
    return value


def _floor_psd(cov: np.ndarray, floor_rel: float = EIG_FLOOR_REL) -> np.ndarray:
    w, v = np.linalg.eigh(np.asarray(cov, dtype=float))
    floor = floor_rel * max(float(w[-1]), 0.0)
    return (v * np.clip(w, floor, None)) @ v.T


def _monge_linear(cov_src: np.ndarray, cov_tgt: np.ndarray) -> np.ndarray:
    """``S^{-1/2} (S^{1/2} T S^{1/2})^{1/2} S^{-1/2}`` with S floored PD."""
    w, v = np.linalg.eigh(np.asarray(cov_src, dtype=float))
    opnorm = float(w[-1])
    if opnorm <= 0:
        raise ValueError("source covariance is singular beyond flooring")
    w = np.clip(w, EIG_FLOOR_REL * opnorm, None)
    root = (v * np.sqrt(w)) @ v.T
    inv_root = (v / np.sqrt(w)) @ v.T
    inner = root @ cov_tgt @ root
    mid = psd_sqrt((inner + inner.T) / 2.0)
    A = inv_root @ mid @ inv_root
    return (A + A.T) / 2.0


def linear_monge_map(src: GaussianSummary, tgt: GaussianSummary) -> AffineMap:
    """Optimal linear (Monge) map pushing the source Gaussian onto the target:
    ``T(z) = m_t + A (z - m_s)`` with ``A S_s A = S_t``."""
    A = _monge_linear(src.cov, tgt.cov)
    return AffineMap(A, tgt.mean, src.mean)


def debiased_monge_map(src: MaskedDataset, tgt_full: np.ndarray) -> AffineMap:
    """Monge map estimate from a masked source sample to a full target sample.

    The linear part is built from the PSD-projected debiased source covariance
    and the plug-in target covariance; the returned map consumes zero-imputed
    source points and debiases them internally (input_rescale = 1/probs).
    """
    if src.n < 2 or np.asarray(tgt_full).shape[0] < 2:
        raise ValueError("both samples must have at least two rows")
    src_summary = debiased_summary(src)
    tgt_summary = empirical_summary(np.asarray(tgt_full, dtype=float))
    A = _monge_linear(src_summary.cov, tgt_summary.cov)
    return AffineMap(A, tgt_summary.mean, src_summary.mean, input_rescale=1.0 / src.probs)


def na_bias_lower_bound(
    m: np.ndarray,
    sigma: np.ndarray,
    p: np.ndarray,
    weights: np.ndarray | None = None,
) -> float:
    """Lower bound on W_2^2 between a diagonal Gaussian and its zero-imputed
    counterpart, for a diagonal metric with the given weights:

        ``sum_i w_i (p_i - 1)^2 m_i^2
          + sum_i w_i [sigma_i - sqrt(p_i) sqrt(sigma_i^2 + (1-p_i) m_i^2)]^2``

    Collapses to 0 when p == 1 and is strictly positive as soon as some
    feature with positive weight is imperfectly observed.
    """
    m = np.asarray(m, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    p = np.asarray(p, dtype=float)
    weights = np.ones_like(m) if weights is None else np.asarray(weights, dtype=float)
    if (sigma <= 0).any():
        raise ValueError("sigma must be strictly positive")
    if (weights < 0).any():
        raise ValueError("metric weights must be nonnegative")
    if not ((p > 0) & (p <= 1)).all():
        raise ValueError("observation probabilities must lie in (0, 1]")
    mean_part = weights * (p - 1.0) ** 2 * m**2
    std_part = weights * (sigma - np.sqrt(p) * np.sqrt(sigma**2 + (1.0 - p) * m**2)) ** 2
    return float(mean_part.sum() + std_part.sum())
