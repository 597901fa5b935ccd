"""First and second moment estimation under heterogeneous MCAR missingness.

The naive estimators treat the zero-imputed matrix as if it were fully
observed; the debiased estimators rescale by the inverse observation
probabilities so that they are consistent for the complete-data moments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import MaskedDataset

__all__ = [
    "GaussianSummary",
    "MomentDiagnostics",
    "imputed_mean",
    "imputed_covariance",
    "debiased_mean",
    "debiased_covariance",
    "debias_covariance_matrix",
    "forward_masked_covariance",
    "effective_rank",
    "empirical_summary",
]

SYMMETRY_TOL = 1e-12
PSD_CERT_TOL = -1e-10


@dataclass(frozen=True)
class GaussianSummary:
    """Mean vector and symmetric covariance, with a PSD certificate.

    ``psd_certified`` is True when the smallest eigenvalue was checked to be
    >= -1e-10.  Estimated debiased covariances can be indefinite at finite n;
    use :meth:`psd_projection` before taking matrix square roots.
    """

    mean: np.ndarray
    cov: np.ndarray
    psd_certified: bool = False

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=float)
        c = np.asarray(self.cov, dtype=float)
        if c.shape != (m.size, m.size):
            raise ValueError(f"covariance shape {c.shape} incompatible with mean size {m.size}")
        scale = max(1.0, float(np.abs(c).max()) if c.size else 1.0)
        if np.abs(c - c.T).max(initial=0.0) > SYMMETRY_TOL * scale:
            raise ValueError("covariance is not symmetric to 1e-12")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", (c + c.T) / 2.0)

    @property
    def dim(self) -> int:
        return self.mean.size

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.cov)[0])

    def psd_projection(self) -> "GaussianSummary":
        """Clip negative eigenvalues at 0; returns a certified summary."""
        w, v = np.linalg.eigh(self.cov)
        w = np.clip(w, 0.0, None)
        return GaussianSummary(self.mean, (v * w) @ v.T, psd_certified=True)

    def to_json(self, path: str | Path | None = None) -> str:
        payload = json.dumps({"mean": self.mean.tolist(), "cov": self.cov.tolist()})
        if path is not None:
            Path(path).write_text(payload, encoding="utf-8")
        return payload

    @classmethod
    def from_json(cls, text_or_path: str | Path) -> "GaussianSummary":
        p = Path(str(text_or_path))
        text = p.read_text(encoding="utf-8") if p.is_file() else str(text_or_path)
        obj = json.loads(text)
        mean = np.asarray(obj["mean"], dtype=float)
        cov = np.asarray(obj["cov"], dtype=float)
        certified = bool(np.linalg.eigvalsh((cov + cov.T) / 2)[0] >= PSD_CERT_TOL)
        return cls(mean, cov, psd_certified=certified)


@dataclass(frozen=True)
class MomentDiagnostics:
    """Effective rank trace/opnorm, with the spectrum extremes it came from."""

    effective_rank: float
    operator_norm: float
    min_eigenvalue: float


def imputed_mean(data: MaskedDataset) -> np.ndarray:
    """Plain average of the zero-imputed rows (missing entries count as 0)."""
    if data.n < 1:
        raise ValueError("need at least one row")
    return data.values.mean(axis=0)


def imputed_covariance(data: MaskedDataset) -> np.ndarray:
    """1/n-normalized covariance of the zero-imputed rows."""
    if data.n < 2:
        raise ValueError("need at least two rows for a covariance")
    centered = data.values - data.values.mean(axis=0)
    cov = (centered.T @ centered) / data.n
    return (cov + cov.T) / 2.0


def debiased_mean(data: MaskedDataset) -> np.ndarray:
    """Inverse-probability rescaled mean, consistent for the full-data mean."""
    return imputed_mean(data) / data.probs


def debias_covariance_matrix(cov_na: np.ndarray, mean_na: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Backward map from zero-imputed moments to complete-data covariance.

    ``P^{-1} S P^{-1} + P^{-1}(I - P^{-1}) diag(S) + P^{-1}(I - P^{-1}) diag(m m^T)``
    with P = diag(probs).  Exact inverse of :func:`forward_masked_covariance`
    when fed population quantities.
    """
    probs = np.asarray(probs, dtype=float)
    if (probs <= 0).any():
        raise ValueError("observation probabilities must be strictly positive")
    inv = 1.0 / probs
    coef = inv * (1.0 - inv)  # diagonal of P^{-1}(I - P^{-1})
    out = cov_na * np.outer(inv, inv)
    out[np.diag_indices_from(out)] += coef * np.diag(cov_na) + coef * np.asarray(mean_na) ** 2
    return (out + out.T) / 2.0


def debiased_covariance(data: MaskedDataset) -> GaussianSummary:
    """Debiased covariance estimate; may be indefinite at finite n.

    At probs == 1 both correction terms vanish and the result equals
    :func:`imputed_covariance` exactly.
    """
    cov = debias_covariance_matrix(imputed_covariance(data), imputed_mean(data), data.probs)
    certified = bool(np.linalg.eigvalsh(cov)[0] >= PSD_CERT_TOL)
    return GaussianSummary(debiased_mean(data), cov, psd_certified=certified)


def forward_masked_covariance(summary: GaussianSummary, probs: np.ndarray) -> np.ndarray:
    """Population covariance of the zero-imputed variable X * omega:
    ``P S P + P(I - P) diag(S) + P(I - P) diag(m)^2``.

    Serves as the oracle for the bias of the naive covariance.
    """
    probs = np.asarray(probs, dtype=float)
    coef = probs * (1.0 - probs)
    out = summary.cov * np.outer(probs, probs)
    out[np.diag_indices_from(out)] += coef * np.diag(summary.cov) + coef * summary.mean**2
    return (out + out.T) / 2.0


def effective_rank(cov: np.ndarray) -> MomentDiagnostics:
    """trace / largest eigenvalue; in [1, d] for a nonzero PSD matrix."""
    cov = np.asarray(cov, dtype=float)
    w = np.linalg.eigvalsh((cov + cov.T) / 2)
    op = float(w[-1])
    if op <= 0 and abs(float(w[0])) == 0.0:
        raise ValueError("effective rank is undefined for the zero matrix")
    return MomentDiagnostics(float(np.trace(cov)) / op, op, float(w[0]))


def empirical_summary(X: np.ndarray) -> GaussianSummary:
    """Plug-in summary of a fully observed sample (1/n covariance)."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        raise ValueError("need at least two rows")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = (centered.T @ centered) / X.shape[0]
    return GaussianSummary(mean, (cov + cov.T) / 2.0, psd_certified=True)
