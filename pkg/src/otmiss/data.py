"""Dataset container, missingness simulation, zero imputation, scaling, CSV I/O.

Missing entries are stored as 0 next to a binary mask; the mask is the single
source of truth for missingness.  This keeps every downstream moment formula
directly applicable to ``values`` without NaN handling.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .rng import child_rng

__all__ = [
    "Mask",
    "MaskedDataset",
    "ScalingParams",
    "generate_mcar_mask",
    "generate_mnar_mask",
    "apply_mask_zero_impute",
    "estimate_missingness",
    "complete_case_filter",
    "minmax_scale",
    "inverse_minmax_scale",
    "read_dataset_csv",
    "write_dataset_csv",
    "read_mask_csv",
    "write_mask_csv",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Mask:
    """Binary observation pattern: entry 1 = observed, 0 = missing."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries)
        if e.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {e.shape}")
        if not np.isin(e, (0, 1)).all():
            raise ValueError("mask entries must be 0 or 1")
        object.__setattr__(self, "entries", _readonly(e.astype(np.int8)))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def d(self) -> int:
        return self.entries.shape[1]

    def as_float(self) -> np.ndarray:
        return self.entries.astype(float)

    def column_means(self) -> np.ndarray:
        return self.entries.mean(axis=0)


@dataclass(frozen=True)
class MaskedDataset:
    """Zero-imputed data matrix plus its mask and observation probabilities.

    ``values[i, j]`` is the observed value when ``mask[i, j] == 1`` and exactly
    0 otherwise.  ``probs[j]`` is the per-feature observation probability used
    for debiasing; it may be the known mechanism value or an estimate
    (`estimate_missingness`), selected by the caller.
    """

    values: np.ndarray
    mask: Mask
    probs: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if v.shape != self.mask.entries.shape:
            raise ValueError(f"values shape {v.shape} != mask shape {self.mask.entries.shape}")
        if p.shape != (v.shape[1],):
            raise ValueError(f"probs must have shape ({v.shape[1]},), got {p.shape}")
        if not ((p > 0) & (p <= 1)).all():
            raise ValueError("observation probabilities must lie in (0, 1]")
        if v[self.mask.entries == 0].any():
            raise ValueError("values must be exactly 0 at masked entries")
        object.__setattr__(self, "values", _readonly(v))
        object.__setattr__(self, "probs", _readonly(p))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def with_probs(self, probs: np.ndarray) -> "MaskedDataset":
        """Same data with a different probability vector (known vs estimated)."""
        return MaskedDataset(self.values.copy(), self.mask, probs)

    def with_estimated_probs(self) -> "MaskedDataset":
        return self.with_probs(estimate_missingness(self.mask))


@dataclass(frozen=True)
class ScalingParams:
    """Per-feature observed min/max from minmax scaling.

    ``constant`` flags features whose observed entries were all equal (mapped
    to 0); ``unobserved`` flags features with no observed entry (left as is).
    """

    feature_min: np.ndarray
    feature_max: np.ndarray
    constant: np.ndarray
    unobserved: np.ndarray

    def __post_init__(self):
        if (self.feature_max < self.feature_min).any():
            raise ValueError("feature_max must be >= feature_min")


def generate_mcar_mask(n: int, d: int, p: np.ndarray | float, seed: int) -> Mask:
    """Heterogeneous MCAR mask: column j observed i.i.d. Bernoulli(p_j).

    Deterministic given ``seed``; independent columns and rows.
    """
    p = np.broadcast_to(np.asarray(p, dtype=float), (d,))
    if not ((p > 0) & (p <= 1)).all():
        raise ValueError("MCAR probabilities must lie in (0, 1]")
    rng = child_rng(seed)
    u = rng.random((n, d))
    return Mask((u < p).astype(np.int8))


def generate_mnar_mask(
    X: np.ndarray,
    p: np.ndarray | float,
    eps: float,
    alpha: float = 2.0,
    seed: int = 0,
) -> Mask:
    """Contaminated mask: each row is MCAR(p) with probability 1-eps, and
    self-masking otherwise, where entry (i, j) is observed with probability
    ``1 / (1 + alpha * exp(-X[i, j]))``.

    Stream contract: the per-row mixture variable is drawn before the entry
    uniforms, so ``eps=0`` reproduces the MCAR *distribution* for the same
    seed but not the same bits as :func:`generate_mcar_mask`.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    p = np.broadcast_to(np.asarray(p, dtype=float), (d,))
    if not ((p > 0) & (p <= 1)).all():
        raise ValueError("MCAR probabilities must lie in (0, 1]")
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"contamination eps must lie in [0, 1], got {eps}")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    rng = child_rng(seed)
    z = rng.random(n)
    u = rng.random((n, d))
    sigmoid = 1.0 / (1.0 + alpha * np.exp(-X))
    thresholds = np.where((z >= eps)[:, None], np.broadcast_to(p, (n, d)), sigmoid)
    return Mask((u < thresholds).astype(np.int8))


def apply_mask_zero_impute(X: np.ndarray, mask: Mask, probs: np.ndarray) -> MaskedDataset:
    """Entrywise product with the mask: missing entries become 0."""
    X = np.asarray(X, dtype=float)
    if X.shape != mask.entries.shape:
        raise ValueError(f"data shape {X.shape} != mask shape {mask.entries.shape}")
    return MaskedDataset(X * mask.entries, mask, np.asarray(probs, dtype=float))


def estimate_missingness(mask: Mask) -> np.ndarray:
    """Per-feature empirical observation frequency, clamped to [1/(2n), 1].

    The clamp keeps the inverse-probability debiasing finite even for
    all-missing columns.
    """
    floor = 1.0 / (2 * mask.n)
    return np.clip(mask.column_means(), floor, 1.0)


def complete_case_filter(data: MaskedDataset) -> tuple[np.ndarray, float]:
    """Fully observed rows and the retained fraction."""
    keep = data.mask.entries.all(axis=1)
    return data.values[keep], float(keep.mean()) if data.n else 0.0


def minmax_scale(data: MaskedDataset) -> tuple[MaskedDataset, ScalingParams]:
    """Map observed entries to [0, 1] per feature; missing entries stay 0.

    Constant features map their observed entries to 0 and are flagged;
    features without any observed entry are left untouched and flagged.
    """
    values = data.values
    obs = data.mask.entries.astype(bool)
    n_obs = obs.sum(axis=0)
    unobserved = n_obs == 0

    with np.errstate(invalid="ignore"):
        masked = np.where(obs, values, np.nan)
        fmin = np.nanmin(np.where(unobserved, 0.0, masked), axis=0)
        fmax = np.nanmax(np.where(unobserved, 0.0, masked), axis=0)
    fmin = np.where(unobserved, 0.0, fmin)
    fmax = np.where(unobserved, 0.0, fmax)
    span = fmax - fmin
    constant = (span == 0) & ~unobserved

    safe_span = np.where(span == 0, 1.0, span)
    scaled = (values - fmin) / safe_span
    scaled = np.where(constant, 0.0, scaled)
    scaled = np.where(unobserved, values, scaled)
    scaled = scaled * obs  # missing entries remain exactly 0

    params = ScalingParams(fmin, fmax, constant, unobserved)
    return MaskedDataset(scaled, data.mask, data.probs), params


def inverse_minmax_scale(data: MaskedDataset, params: ScalingParams) -> MaskedDataset:
    """Undo :func:`minmax_scale` on observed entries (constant features map
    back to their constant value)."""
    obs = data.mask.entries.astype(bool)
    span = params.feature_max - params.feature_min
    restored = data.values * span + params.feature_min
    restored = np.where(params.constant, params.feature_min, restored)
    restored = np.where(params.unobserved, data.values, restored)
    return MaskedDataset(restored * obs, data.mask, data.probs)


# ---------------------------------------------------------------------------
# CSV interchange: header row of feature names, empty cell or literal "NA"
# marks a missing value, comma separator, "." decimal point, UTF-8.
# ---------------------------------------------------------------------------

def read_dataset_csv(
    path: str | Path,
    probs: np.ndarray | None = None,
) -> tuple[MaskedDataset, list[str]]:
    """Load a dataset CSV; missingness probabilities are estimated from the
    mask unless ``probs`` is supplied."""
    frame = pd.read_csv(path, na_values=["", "NA"], keep_default_na=False, encoding="utf-8")
    values = frame.to_numpy(dtype=float)
    mask = Mask((~np.isnan(values)).astype(np.int8))
    values = np.nan_to_num(values, nan=0.0)
    if probs is None:
        probs = estimate_missingness(mask)
    return MaskedDataset(values, mask, probs), [str(c) for c in frame.columns]


def write_dataset_csv(
    path: str | Path,
    data: MaskedDataset,
    feature_names: list[str] | None = None,
) -> None:
    names = feature_names or [f"x{j}" for j in range(data.d)]
    if len(names) != data.d:
        raise ValueError("feature name count does not match dimension")
    out = np.where(data.mask.entries.astype(bool), data.values, np.nan)
    pd.DataFrame(out, columns=names).to_csv(path, index=False, na_rep="NA", encoding="utf-8")


def read_mask_csv(path: str | Path) -> Mask:
    frame = pd.read_csv(path, encoding="utf-8")
    return Mask(frame.to_numpy(dtype=int))


def write_mask_csv(path: str | Path, mask: Mask, feature_names: list[str] | None = None) -> None:
    names = feature_names or [f"x{j}" for j in range(mask.d)]
    pd.DataFrame(mask.entries, columns=names).to_csv(path, index=False, encoding="utf-8")
