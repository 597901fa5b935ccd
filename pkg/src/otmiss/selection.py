"""Hyperparameter selection for matrix completion: Frobenius hold-out CV, the
validation-set-free BW criterion, and the cross-BW criterion.

The BW-based criteria never remove observed entries: the completer always
sees the full masked dataset, and the score compares the Gaussian summary of
the completed matrix (treated as fully observed) against the debiased summary
of the raw masked data.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .completion import isvt, soft_impute
from .data import Mask, MaskedDataset, estimate_missingness
from .gaussian import bures_wasserstein, debiased_summary, entropic_gaussian_ot
from .moments import empirical_summary
from .rng import child_rng

__all__ = [
    "SelectionConfig",
    "SelectionReport",
    "frobenius_cv_score",
    "bw_score",
    "cross_bw_score",
    "select",
    "default_lambda_grid",
]

CRITERIA = ("frobenius", "bw", "cross_bw")


def default_lambda_grid() -> np.ndarray:
    """20 log-spaced points in [1e-2, 1e2]."""
    return np.logspace(-2, 2, 20)


@dataclass(frozen=True)
class SelectionConfig:
    """Knobs shared by the selection criteria.

    ``completer`` is 'soft_impute' or 'isvt'; ``eps`` > 0 switches the BW
    criterion to the entropic closed form (use the target problem's
    regularization); ``use_estimated_probs`` re-estimates missingness from the
    mask inside the criteria (the default: the criterion is data-driven).
    """

    completer: str = "soft_impute"
    eps: float = 0.0
    delta_val: float = 0.2
    folds: int = 3
    seed: int = 0
    use_estimated_probs: bool = True
    completion_kwargs: dict = field(default_factory=dict)


def _complete(data: MaskedDataset, lam: float, config: SelectionConfig):
    if config.completer == "soft_impute":
        return soft_impute(data, lam, **config.completion_kwargs)
    if config.completer == "isvt":
        return isvt(data, lam, **config.completion_kwargs)
    raise ValueError(f"unknown completer: {config.completer}")


def _raw_summary(data: MaskedDataset, config: SelectionConfig):
    side = data.with_estimated_probs() if config.use_estimated_probs else data
    return debiased_summary(side)


def _holdout_split(data: MaskedDataset, delta_val: float, rng) -> tuple[MaskedDataset, np.ndarray] | None:
    """Move a share delta_val of the observed entries into a validation mask.

    Returns (train dataset, boolean validation mask), or None when the
    validation set would be empty.
    """
    obs_idx = np.flatnonzero(data.mask.entries)
    n_val = int(round(delta_val * obs_idx.size))
    if n_val == 0 or n_val >= obs_idx.size:
        return None
    val_flat = rng.choice(obs_idx, size=n_val, replace=False)
    val = np.zeros(data.mask.entries.size, dtype=bool)
    val[val_flat] = True
    val = val.reshape(data.mask.entries.shape)
    train_entries = data.mask.entries * (~val)
    train_mask = Mask(train_entries)
    train = MaskedDataset(data.values * train_entries, train_mask, estimate_missingness(train_mask))
    return train, val


def _frobenius_fold_scores(
    data: MaskedDataset,
    lam: float,
    delta_val: float,
    folds: int,
    seed: int,
    config: SelectionConfig,
) -> list[float]:
    scores = []
    for k in range(folds):
        split = _holdout_split(data, delta_val, child_rng(seed, k))
        if split is None:
            scores.append(math.inf)
            continue
        train, val = split
        result = _complete(train, lam, config)
        denom = np.linalg.norm(data.values[val])
        if denom == 0 or not result.converged:
            scores.append(math.inf)
            continue
        scores.append(float(np.linalg.norm(result.completed[val] - data.values[val]) / denom))
    return scores


def frobenius_cv_score(
    data: MaskedDataset,
    lam: float,
    delta_val: float = 0.2,
    folds: int = 3,
    seed: int = 0,
    config: SelectionConfig | None = None,
) -> float:
    """Mean relative Frobenius error on held-out observed entries.

    Each fold removes ``delta_val`` of the observed entries uniformly at
    random, completes the rest at ``lam``, and scores
    ``||O_val o (Z - X^NA)||_F / ||O_val o X^NA||_F``.  Degenerate folds
    (empty validation set or all-zero held-out entries) score +inf.  Folds
    depend only on (mask, delta_val, seed), so scores are comparable across
    lambdas evaluated with the same seed.
    """
    config = config or SelectionConfig()
    return float(np.mean(_frobenius_fold_scores(data, lam, delta_val, folds, seed, config)))


def bw_score(
    data: MaskedDataset,
    lam: float,
    eps: float = 0.0,
    config: SelectionConfig | None = None,
) -> float:
    """Validation-free criterion: (entropic) BW distance between the summary
    of the completed matrix and the debiased summary of the raw masked data.

    No held-out entries are used; the completer consumes ``data`` as is.
    """
    config = config or SelectionConfig()
    result = _complete(data, lam, config)
    if not result.converged:
        return math.inf
    completed = empirical_summary(result.completed)
    raw = _raw_summary(data, config)
    if eps > 0:
        return float(entropic_gaussian_ot(completed, raw, eps))
    return float(bures_wasserstein(completed, raw).squared_distance)


def cross_bw_score(
    x: MaskedDataset,
    y: MaskedDataset,
    lam_x: float,
    lam_y: float,
    config: SelectionConfig | None = None,
) -> float:
    """|BW(completed X, completed Y) - debiased BW(raw X, raw Y)|."""
    config = config or SelectionConfig()
    rx = _complete(x, lam_x, config)
    ry = _complete(y, lam_y, config)
    if not (rx.converged and ry.converged):
        return math.inf
    plug_in = bures_wasserstein(empirical_summary(rx.completed), empirical_summary(ry.completed))
    raw = bures_wasserstein(_raw_summary(x, config), _raw_summary(y, config))
    return abs(float(plug_in.squared_distance) - float(raw.squared_distance))


@dataclass(frozen=True)
class SelectionReport:
    """Scores per criterion over a grid, argmin indices, and the seed used.

    Ties resolve to the smallest lambda (lexicographic for pair grids)."""

    grid: list
    scores: dict
    chosen: dict
    replicate_seed: int
    fold_scores: dict = field(default_factory=dict)

    def chosen_value(self, criterion: str):
        return self.grid[self.chosen[criterion]]

    def to_json(self, path: str | Path | None = None) -> str:
        payload = json.dumps(
            {
                "grid": [list(g) if isinstance(g, tuple) else g for g in self.grid],
                "scores": {k: list(v) for k, v in self.scores.items()},
                "chosen": self.chosen,
                "replicate_seed": self.replicate_seed,
            }
        )
        if path is not None:
            Path(path).write_text(payload, encoding="utf-8")
        return payload

    def to_long_frame(self) -> pd.DataFrame:
        rows = []
        for criterion, per_grid in self.fold_scores.items():
            for gi, folds in enumerate(per_grid):
                for fold, score in enumerate(folds):
                    rows.append((criterion, _grid_repr(self.grid[gi]), fold, score))
        for criterion, vals in self.scores.items():
            if criterion in self.fold_scores:
                continue
            for gi, score in enumerate(vals):
                rows.append((criterion, _grid_repr(self.grid[gi]), 0, score))
        return pd.DataFrame(rows, columns=["criterion", "lambda", "fold", "score"])

    def to_long_csv(self, path: str | Path) -> None:
        self.to_long_frame().to_csv(path, index=False, encoding="utf-8")


def _grid_repr(g):
    return json.dumps(list(g)) if isinstance(g, (tuple, list)) else g


def _grid_key(g):
    return tuple(g) if isinstance(g, (tuple, list)) else (g,)


def select(
    grid,
    criterion: str | list[str],
    config: SelectionConfig,
    x: MaskedDataset,
    y: MaskedDataset | None = None,
) -> SelectionReport:
    """Evaluate criteria over the grid and pick the argmin per criterion.

    ``grid`` holds lambdas, or (lambda_x, lambda_y) pairs for 'cross_bw'.
    Deterministic given ``config.seed`` (cold starts everywhere).
    """
    grid = list(grid)
    if not grid:
        raise ValueError("grid must be nonempty")
    criteria = [criterion] if isinstance(criterion, str) else list(criterion)
    for c in criteria:
        if c not in CRITERIA:
            raise ValueError(f"unknown criterion: {c}")
    if "cross_bw" in criteria and y is None:
        raise ValueError("cross_bw needs the second dataset")

    scores: dict[str, list[float]] = {}
    fold_scores: dict[str, list[list[float]]] = {}
    for c in criteria:
        vals = []
        folds_acc = []
        for g in grid:
            if c == "frobenius":
                lam = g[0] if isinstance(g, (tuple, list)) else g
                per_fold = _frobenius_fold_scores(
                    x, lam, config.delta_val, config.folds, config.seed, config
                )
                folds_acc.append(per_fold)
                vals.append(float(np.mean(per_fold)))
            elif c == "bw":
                lam = g[0] if isinstance(g, (tuple, list)) else g
                vals.append(bw_score(x, lam, config.eps, config))
            else:
                lam_x, lam_y = (g if isinstance(g, (tuple, list)) else (g, g))
                vals.append(cross_bw_score(x, y, lam_x, lam_y, config))
        scores[c] = vals
        if c == "frobenius":
            fold_scores[c] = folds_acc

    chosen = {}
    for c in criteria:
        finite = [i for i, s in enumerate(scores[c]) if math.isfinite(s)]
        if not finite:
            raise ValueError(f"all scores are +inf for criterion {c}")
        chosen[c] = min(finite, key=lambda i: (scores[c][i], _grid_key(grid[i])))
    return SelectionReport(grid, scores, chosen, config.seed, fold_scores)
