"""End-to-end estimators and the experiment harness.

Every experiment is a pure function of (config, seed): replicate k draws its
randomness from a stream keyed by k, so reruns produce byte-identical CSV
files regardless of worker count.  Aggregations report median and IQR.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.optimize import minimize
from scipy.special import expit

from . import __version__
from .completion import CompletionResult, isvt, soft_impute
from .data import (
    Mask,
    MaskedDataset,
    apply_mask_zero_impute,
    complete_case_filter,
    estimate_missingness,
    generate_mcar_mask,
    generate_mnar_mask,
)
from .datagen import (
    make_two_cluster_distribution,
    random_gaussian,
    sample_gaussian,
    two_cluster_classes,
    two_moons_lifted,
)
from .discrete import CostMatrix, OtSolution, cost_matrix, sinkhorn, solve_exact_ot
from .gaussian import (
    bures_wasserstein,
    debiased_bw,
    debiased_monge_map,
    linear_monge_map,
    na_bias_lower_bound,
)
from .moments import GaussianSummary, empirical_summary, imputed_covariance, imputed_mean
from .rng import child_rng
from .selection import SelectionConfig, bw_score, cross_bw_score, frobenius_cv_score

__all__ = [
    "TwoStepResult",
    "two_step_entropic_ot",
    "LinearClassifier",
    "train_logistic",
    "ConvergenceConfig",
    "MnarConfig",
    "DaConfig",
    "SelectionBenchConfig",
    "run_convergence",
    "run_mnar_robustness",
    "run_domain_adaptation",
    "run_selection_benchmark",
]


# ---------------------------------------------------------------------------
# Two-step estimator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoStepResult:
    solution: OtSolution
    completion_x: CompletionResult
    completion_y: CompletionResult
    cost: CostMatrix
    cost_gap: float | None = None  # ||C_hat - C||_F when ground truth given


def two_step_entropic_ot(
    x: MaskedDataset,
    y: MaskedDataset,
    lam_x: float,
    lam_y: float,
    eps: float,
    M: np.ndarray | None = None,
    completer: str = "isvt",
    x_full: np.ndarray | None = None,
    y_full: np.ndarray | None = None,
    sinkhorn_tol: float = 1e-9,
    sinkhorn_max_iter: int = 100_000,
    **completion_kwargs,
) -> TwoStepResult:
    """Complete both sides, then solve OT on the completed data.

    ``eps = 0`` routes to the exact solver.  With full masks and lambdas 0 the
    result is identical to direct OT on the raw data.  When the true matrices
    are supplied, ``cost_gap`` reports the Frobenius gap to the true cost.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    complete = isvt if completer == "isvt" else soft_impute
    if completer not in ("isvt", "soft_impute"):
        raise ValueError(f"unknown completer: {completer}")
    cx = complete(x, lam_x, **completion_kwargs)
    cy = complete(y, lam_y, **completion_kwargs)
    cost = cost_matrix(cx.completed, cy.completed, M)
    if eps == 0:
        sol = solve_exact_ot(cost)
    else:
        sol = sinkhorn(cost, eps, tol=sinkhorn_tol, max_iter=sinkhorn_max_iter)
    gap = None
    if x_full is not None and y_full is not None:
        gap = float(np.linalg.norm(cost.entries - cost_matrix(x_full, y_full, M).entries))
    return TwoStepResult(sol, cx, cy, cost, gap)


# ---------------------------------------------------------------------------
# Logistic classifier (domain adaptation plumbing)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearClassifier:
    weights: np.ndarray
    bias: float

    def decision(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.weights + self.bias

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.where(self.decision(X) >= 0, 1.0, -1.0)

    def accuracy(self, X: np.ndarray, y: np.ndarray) -> float:
        return float((self.predict(X) == np.asarray(y)).mean())


def train_logistic(X: np.ndarray, y: np.ndarray, l2: float = 1e-3, max_iter: int = 500) -> LinearClassifier:
    """L2-regularized logistic regression on +/-1 labels (bias unpenalized),
    minimized to gradient norm < 1e-6 or ``max_iter`` L-BFGS iterations."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not np.isfinite(X).all():
        raise ValueError("features must be finite")
    if set(np.unique(y)) != {-1.0, 1.0}:
        raise ValueError("labels must be -1/+1 with both classes present")
    n, d = X.shape

    def objective(theta):
        w, b = theta[:d], theta[d]
        z = y * (X @ w + b)
        loss = np.logaddexp(0.0, -z).mean() + 0.5 * l2 * (w @ w)
        s = expit(-z)  # d loss / dz per sample, up to -y/n
        grad_w = -(X.T @ (y * s)) / n + l2 * w
        grad_b = -(y * s).mean()
        return loss, np.concatenate([grad_w, [grad_b]])

    res = minimize(
        objective,
        np.zeros(d + 1),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iter, "gtol": 1e-6, "ftol": 1e-14},
    )
    return LinearClassifier(res.x[:d], float(res.x[d]))


# ---------------------------------------------------------------------------
# Output plumbing
# ---------------------------------------------------------------------------

def _versions() -> dict:
    import scipy

    return {
        "otmiss": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "python": sys.version.split()[0],
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def write_outputs(out_dir, experiment: str, config, frames: dict[str, pd.DataFrame], extra=None) -> Path:
    """Write ``<out>/<experiment>/<name>.csv`` files plus ``manifest.json``."""
    target = Path(out_dir) / experiment
    target.mkdir(parents=True, exist_ok=True)
    written = []
    for name, frame in frames.items():
        path = target / f"{name}.csv"
        frame.to_csv(path, index=False, encoding="utf-8")
        written.append(path.name)
    manifest = {
        "experiment": experiment,
        "config": _jsonable(asdict(config)),
        "versions": _versions(),
        "outputs": written,
    }
    if extra:
        manifest.update(_jsonable(extra))
    (target / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return target


def _map_replicates(fn, replicates: int, threads: int = 1) -> list:
    """Ordered replicate results; safe to parallelize since streams are keyed."""
    if threads <= 1:
        return [fn(r) for r in range(replicates)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(replicates)))


def _median_iqr(frame: pd.DataFrame, by: list[str], value: str) -> pd.DataFrame:
    grouped = frame.groupby(by)[value]
    out = grouped.median().rename("median").to_frame()
    out["iqr"] = grouped.quantile(0.75) - grouped.quantile(0.25)
    return out.reset_index()


# ---------------------------------------------------------------------------
# Convergence of the debiased BW estimator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceConfig:
    name: str = "convergence"
    d: int = 5
    sample_sizes: tuple = (64, 256, 1024, 4096)
    replicates: int = 50
    mode: str = "heterogeneous"  # or "uniform_sweep"
    p_low: float = 0.3
    p_high: float = 0.9
    uniform_p_values: tuple = (0.3, 0.5, 0.7, 0.9)
    diagonal: bool = False
    same_distribution: bool = False  # Y side drawn from the X Gaussian, fully observed
    data_mode: str = "fixed"  # "fixed": one master sample per size grid; "fresh": new draws per replicate
    seed: int = 0


def _naive_bw(x: MaskedDataset, y: MaskedDataset):
    ax = GaussianSummary(imputed_mean(x), imputed_covariance(x), psd_certified=True)
    ay = GaussianSummary(imputed_mean(y), imputed_covariance(y), psd_certified=True)
    return bures_wasserstein(ax, ay)


def run_convergence(config: ConvergenceConfig, out_dir, threads: int = 1) -> Path:
    """Debiased vs naive BW estimation error over sample sizes.

    Emits ``estimates.csv`` with one row per (n, replicate, estimator[, p])
    holding the absolute error and the three BW terms, and ``summary.csv``
    with median/IQR per cell.  The uniform-p sweep reuses replicate streams
    across p levels (common random numbers), so curves differ only through the
    missingness level.
    """
    rng = child_rng(config.seed, 0)
    gauss_x = random_gaussian(config.d, rng, diagonal=config.diagonal)
    gauss_y = gauss_x if config.same_distribution else random_gaussian(config.d, rng, diagonal=config.diagonal)
    bw_true = bures_wasserstein(gauss_x, gauss_y).squared_distance

    if config.mode == "uniform_sweep":
        p_cases = [(float(p), np.full(config.d, p)) for p in config.uniform_p_values]
    else:
        p_cases = [(np.nan, rng.uniform(config.p_low, config.p_high, size=config.d))]
    q_of = (lambda p_vec: np.ones(config.d)) if config.same_distribution else (lambda p_vec: p_vec)

    max_n = max(config.sample_sizes)
    masters = {}
    if config.data_mode == "fixed":
        m_rng = child_rng(config.seed, 1)
        masters["x"] = sample_gaussian(gauss_x, max_n, m_rng)
        masters["y"] = sample_gaussian(gauss_y, max_n, m_rng)

    def one_cell(p_label, p_vec, n, replicate):
        r = child_rng(config.seed, 2, int(n), replicate)
        if config.data_mode == "fixed":
            X, Y = masters["x"][:n], masters["y"][:n]
        else:
            X = sample_gaussian(gauss_x, n, r)
            Y = sample_gaussian(gauss_y, n, r)
        q_vec = q_of(p_vec)
        mask_x = (r.random((n, config.d)) < p_vec).astype(np.int8)
        mask_y = (r.random((n, config.d)) < q_vec).astype(np.int8)
        x = apply_mask_zero_impute(X, Mask(mask_x), p_vec)
        y = apply_mask_zero_impute(Y, Mask(mask_y), q_vec)
        rows = []
        for estimator, report in (("debiased", debiased_bw(x, y)), ("naive", _naive_bw(x, y))):
            rows.append(
                {
                    "n": n,
                    "replicate": replicate,
                    "estimator": estimator,
                    "bw_error": abs(report.squared_distance - bw_true),
                    "mean_term": report.mean_term,
                    "trace_term": report.trace_term,
                    "cross_term": report.cross_term,
                    **({"p": p_label} if config.mode == "uniform_sweep" else {}),
                }
            )
        return rows

    records = []
    for p_label, p_vec in p_cases:
        for n in config.sample_sizes:
            chunks = _map_replicates(lambda rep: one_cell(p_label, p_vec, n, rep), config.replicates, threads)
            for chunk in chunks:
                records.extend(chunk)
    estimates = pd.DataFrame.from_records(records)
    by = ["n", "estimator"] + (["p"] if config.mode == "uniform_sweep" else [])
    summary = _median_iqr(estimates, by, "bw_error")

    extra = {"bw_true": bw_true, "mean_x": gauss_x.mean, "cov_x": gauss_x.cov,
             "mean_y": gauss_y.mean, "cov_y": gauss_y.cov,
             "probs": p_cases[0][1] if config.mode != "uniform_sweep" else None}
    if config.diagonal and config.same_distribution and config.mode != "uniform_sweep":
        extra["na_bias_lower_bound"] = na_bias_lower_bound(
            gauss_x.mean, np.sqrt(np.diag(gauss_x.cov)), p_cases[0][1]
        )
    return write_outputs(out_dir, config.name, config, {"estimates": estimates, "summary": summary}, extra)


# ---------------------------------------------------------------------------
# Robustness to MNAR contamination
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MnarConfig:
    name: str = "mnar"
    d: int = 5
    n: int = 500
    replicates: int = 20
    eps_grid: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    p_grid: tuple = (0.5, 0.7, 0.9)
    alpha: float = 2.0
    # False: debias with the declared MCAR probabilities, measuring how the
    # estimator degrades as that assumption is contaminated; True: re-estimate
    # feature-wise rates from each drawn mask
    use_estimated_probs: bool = False
    # shifts both Gaussian means; negative values push the data into the
    # low-observation tail of the self-masking sigmoid, making the MNAR
    # component genuinely destructive
    mean_shift: float = 0.0
    seed: int = 0


def run_mnar_robustness(config: MnarConfig, out_dir, threads: int = 1) -> Path:
    """BW estimation error over the (contamination eps, MCAR p) grid."""
    rng = child_rng(config.seed, 0)
    gauss_x = random_gaussian(config.d, rng)
    gauss_y = random_gaussian(config.d, rng)
    if config.mean_shift:
        gauss_x = GaussianSummary(gauss_x.mean + config.mean_shift, gauss_x.cov, psd_certified=True)
        gauss_y = GaussianSummary(gauss_y.mean + config.mean_shift, gauss_y.cov, psd_certified=True)
    bw_true = bures_wasserstein(gauss_x, gauss_y).squared_distance

    def one(eps, p, replicate):
        r = child_rng(config.seed, 1, replicate)
        seed_x = int(r.integers(2**31))
        seed_y = int(r.integers(2**31))
        X = sample_gaussian(gauss_x, config.n, r)
        Y = sample_gaussian(gauss_y, config.n, r)
        p_vec = np.full(config.d, p)
        mx = generate_mnar_mask(X, p_vec, eps, config.alpha, seed_x)
        my = generate_mnar_mask(Y, p_vec, eps, config.alpha, seed_y)
        x = apply_mask_zero_impute(X, mx, p_vec)
        y = apply_mask_zero_impute(Y, my, p_vec)
        if config.use_estimated_probs:
            x, y = x.with_estimated_probs(), y.with_estimated_probs()
        rows = []
        for estimator, report in (("debiased", debiased_bw(x, y)), ("naive", _naive_bw(x, y))):
            rows.append(
                {
                    "eps": eps,
                    "p": p,
                    "replicate": replicate,
                    "estimator": estimator,
                    "bw_error": abs(report.squared_distance - bw_true),
                }
            )
        return rows

    records = []
    for eps in config.eps_grid:
        for p in config.p_grid:
            for chunk in _map_replicates(lambda rep: one(eps, p, rep), config.replicates, threads):
                records.extend(chunk)
    estimates = pd.DataFrame.from_records(records)
    summary = _median_iqr(estimates, ["eps", "p", "estimator"], "bw_error")
    return write_outputs(out_dir, config.name, config, {"estimates": estimates, "summary": summary},
                         {"bw_true": bw_true})


# ---------------------------------------------------------------------------
# Domain adaptation with a pretrained classifier
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DaConfig:
    name: str = "da"
    d: int = 5
    n_labeled: int = 5000
    n_target: int = 6000
    n_source: int = 200
    p: float = 0.5
    replicates: int = 100
    l2: float = 1e-3
    alpha: float = 2.0
    shifts: tuple = ("linear", "nonlinear")
    missingness: tuple = ("mcar", "mnar")
    seed: int = 0


def _spd_shift(d: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Random SPD matrix with eigenvalues in [0.5, 2] plus a random offset, so
    the optimal alignment stays inside the linear Monge class."""
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    A = (q * rng.uniform(0.5, 2.0, size=d)) @ q.T
    return (A + A.T) / 2.0, rng.normal(size=d)


def _shift_apply(kind: str, X: np.ndarray, shift) -> np.ndarray:
    if kind == "linear":
        A, b = shift
        return X @ A.T + b
    if kind == "nonlinear":
        return np.cos(X)
    if kind == "none":
        return X
    raise ValueError(f"unknown shift: {kind}")


def run_domain_adaptation(config: DaConfig, out_dir, threads: int = 1) -> Path:
    """Target accuracy of OT domain adaptation variants under missing data.

    Methods: debiased Monge alignment, per-feature mean imputation, complete
    cases (skipped with a reason code when its covariance is unusable), and
    the unaligned baseline.
    """

    def one_replicate(rep):
        r = child_rng(config.seed, rep)
        dist = make_two_cluster_distribution(config.d, r)
        X_lab, y_lab = dist.sample(config.n_labeled // 2, r)
        clf = train_logistic(X_lab, y_lab, l2=config.l2)
        X_t_base, y_t = dist.sample(config.n_target // 2, r)
        X_s_full, _ = dist.sample(config.n_source // 2, r)
        shift = _spd_shift(config.d, r)
        p_vec = np.full(config.d, config.p)
        rows = []
        for kind in config.shifts:
            X_t = _shift_apply(kind, X_t_base, shift)
            for mech in config.missingness:
                if mech == "mcar":
                    mask = generate_mcar_mask(config.n_source, config.d, p_vec, int(r.integers(2**31)))
                    src = apply_mask_zero_impute(X_s_full, mask, p_vec)
                elif mech == "mnar":
                    mask = generate_mnar_mask(X_s_full, p_vec, 1.0, config.alpha, int(r.integers(2**31)))
                    src = apply_mask_zero_impute(X_s_full, mask, estimate_missingness(mask))
                else:
                    raise ValueError(f"unknown missingness: {mech}")
                for method, acc, reason in _da_methods(clf, src, X_t, y_t):
                    rows.append(
                        {
                            "replicate": rep,
                            "shift": kind,
                            "missingness": mech,
                            "method": method,
                            "accuracy": acc,
                            "skipped_reason": reason,
                        }
                    )
        return rows

    records = []
    for chunk in _map_replicates(one_replicate, config.replicates, threads):
        records.extend(chunk)
    results = pd.DataFrame.from_records(records)
    ok = results[results["skipped_reason"] == ""]
    summary = _median_iqr(ok, ["shift", "missingness", "method"], "accuracy")
    return write_outputs(out_dir, config.name, config, {"results": results, "summary": summary})


def _da_methods(clf: LinearClassifier, src: MaskedDataset, X_t: np.ndarray, y_t: np.ndarray):
    """Yield (method, accuracy, skipped_reason) triples."""
    target_summary = empirical_summary(X_t)
    yield "unaligned", clf.accuracy(X_t, y_t), ""

    try:
        fwd = debiased_monge_map(src, X_t)
        aligned = fwd.inverse().apply(X_t)
        yield "debiased_otda", clf.accuracy(aligned, y_t), ""
    except (ValueError, np.linalg.LinAlgError) as exc:
        yield "debiased_otda", np.nan, f"failed: {exc}"

    obs = src.mask.entries.astype(bool)
    counts = obs.sum(axis=0)
    col_means = np.where(counts > 0, src.values.sum(axis=0) / np.maximum(counts, 1), 0.0)
    imputed = np.where(obs, src.values, col_means)
    try:
        to_src = linear_monge_map(target_summary, empirical_summary(imputed))
        yield "mean_imputation_otda", clf.accuracy(to_src.apply(X_t), y_t), ""
    except (ValueError, np.linalg.LinAlgError) as exc:
        yield "mean_imputation_otda", np.nan, f"failed: {exc}"

    rows, fraction = complete_case_filter(src)
    if rows.shape[0] < src.d + 1:
        yield "complete_case_otda", np.nan, f"insufficient complete cases ({rows.shape[0]})"
        return
    cc_summary = empirical_summary(rows)
    w = np.linalg.eigvalsh(cc_summary.cov)
    if w[0] <= 1e-10 * max(w[-1], 1e-30):
        yield "complete_case_otda", np.nan, "singular complete-case covariance"
        return
    try:
        to_src = linear_monge_map(target_summary, cc_summary)
        yield "complete_case_otda", clf.accuracy(to_src.apply(X_t), y_t), ""
    except (ValueError, np.linalg.LinAlgError) as exc:
        yield "complete_case_otda", np.nan, f"failed: {exc}"


# ---------------------------------------------------------------------------
# Hyperparameter-selection benchmark
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SelectionBenchConfig:
    name: str = "select"
    mode: str = "random_projection"  # "random_projection" | "two_cloud" | "dataset"
    replicates: int = 10
    lambda_grid: tuple = tuple(np.logspace(-2, 2, 20))
    completer: str = "soft_impute"
    delta_val: float = 0.2
    folds: int = 3
    eps: float = 0.0  # entropic regularization of the target OT problem
    completion_max_iter: int = 2000
    completion_rel_tol: float = 1e-5
    # random_projection mode
    n_per_class: int = 150
    lift_dim: int = 10
    p_x: float = 0.35
    p_y: float = 0.9
    # two_cloud mode
    d: int = 5
    two_cloud_n: int = 200
    p: float = 0.5
    q: float = 0.3
    # dataset mode
    csv_path: str = ""
    label_column: str = "label"
    removal_prob_pos: float = 0.7
    removal_prob_neg: float = 0.3
    seed: int = 0


def _bench_clouds(config: SelectionBenchConfig, rep: int):
    """Draw the (X, Y) point clouds and per-side observation probabilities."""
    r = child_rng(config.seed, rep)
    if config.mode == "random_projection":
        X, Y = two_moons_lifted(config.n_per_class, r, d_out=config.lift_dim)
        return X, Y, np.full(config.lift_dim, config.p_x), np.full(config.lift_dim, config.p_y)
    if config.mode == "two_cloud":
        pts, labels = two_cluster_classes(config.two_cloud_n, config.d, r)
        return pts[labels > 0], pts[labels < 0], np.full(config.d, config.p), np.full(config.d, config.q)
    if config.mode == "dataset":
        if not config.csv_path or not Path(config.csv_path).is_file():
            raise FileNotFoundError(f"dataset mode needs an input CSV, got {config.csv_path!r}")
        frame = pd.read_csv(config.csv_path, na_values=["", "NA"], keep_default_na=False)
        labels = frame[config.label_column].to_numpy(dtype=float)
        feats = frame.drop(columns=[config.label_column]).to_numpy(dtype=float)
        d = feats.shape[1]
        return (
            feats[labels > 0],
            feats[labels <= 0],
            np.full(d, 1.0 - config.removal_prob_pos),
            np.full(d, 1.0 - config.removal_prob_neg),
        )
    raise ValueError(f"unknown mode: {config.mode}")


def _solve(costm: CostMatrix, eps: float) -> OtSolution:
    return solve_exact_ot(costm) if eps == 0 else sinkhorn(costm, eps)


def run_selection_benchmark(config: SelectionBenchConfig, out_dir, threads: int = 1) -> Path:
    """Score curves, chosen lambdas, OT-cost errors, and completion/OT error
    heatmaps over the lambda grid, for all three selection criteria."""
    grid = [float(l) for l in config.lambda_grid]
    completion_kwargs = (
        {"max_iter": config.completion_max_iter, "rel_tol": config.completion_rel_tol}
        if config.completer == "soft_impute"
        else {"max_iter": config.completion_max_iter}
    )
    sel_cfg = SelectionConfig(
        completer=config.completer,
        eps=config.eps,
        delta_val=config.delta_val,
        folds=config.folds,
        seed=config.seed,
        completion_kwargs=completion_kwargs,
    )
    scale = config.mode != "random_projection"

    def complete(data, lam):
        if config.completer == "soft_impute":
            return soft_impute(data, lam, **completion_kwargs)
        return isvt(data, lam, **completion_kwargs)

    def one_replicate(rep):
        X, Y, p_vec, q_vec = _bench_clouds(config, rep)
        if scale:
            # scale on the full data so the ground-truth OT value refers to
            # the same coordinates as the masked problem
            lo_x, hi_x = X.min(0), X.max(0)
            lo_y, hi_y = Y.min(0), Y.max(0)
            X = (X - lo_x) / np.where(hi_x > lo_x, hi_x - lo_x, 1.0)
            Y = (Y - lo_y) / np.where(hi_y > lo_y, hi_y - lo_y, 1.0)
        r = child_rng(config.seed, rep, 1)
        mask_x = generate_mcar_mask(X.shape[0], X.shape[1], p_vec, int(r.integers(2**31)))
        mask_y = generate_mcar_mask(Y.shape[0], Y.shape[1], q_vec, int(r.integers(2**31)))
        x = apply_mask_zero_impute(X, mask_x, p_vec)
        y = apply_mask_zero_impute(Y, mask_y, q_vec)

        true_value = _solve(cost_matrix(X, Y), config.eps).value
        naive_value = _solve(cost_matrix(x.values, y.values), config.eps).value
        naive_err = abs(naive_value - true_value) / abs(true_value)

        # completions and per-lambda diagnostics for each side
        comp_x = {lam: complete(x, lam) for lam in grid}
        comp_y = {lam: complete(y, lam) for lam in grid}
        zero_err_x = np.linalg.norm(x.values - X)
        zero_err_y = np.linalg.norm(y.values - Y)

        score_rows = []
        for side, data_side, truth, comps, zero_err in (
            ("x", x, X, comp_x, zero_err_x),
            ("y", y, Y, comp_y, zero_err_y),
        ):
            for lam in grid:
                fro = frobenius_cv_score(data_side, lam, config.delta_val, config.folds, config.seed, sel_cfg)
                bw = bw_score(data_side, lam, config.eps, sel_cfg)
                rec_err = np.linalg.norm(comps[lam].completed - truth) / max(np.linalg.norm(truth), 1e-30)
                score_rows.append(
                    {
                        "replicate": rep,
                        "side": side,
                        "lambda": lam,
                        "frobenius": fro,
                        "bw": bw,
                        "recovery_rel_error": rec_err,
                        "completion_vs_zero_ratio": np.linalg.norm(comps[lam].completed - truth) / max(zero_err, 1e-30),
                    }
                )
        cross_rows = [
            {
                "replicate": rep,
                "lambda": lam,
                "cross_bw": cross_bw_score(x, y, lam, lam, sel_cfg),
            }
            for lam in grid
        ]

        # heatmap: OT error over the (lambda_x, lambda_y) grid
        heat_rows = []
        pair_err = {}
        for lx in grid:
            for ly in grid:
                value = _solve(cost_matrix(comp_x[lx].completed, comp_y[ly].completed), config.eps).value
                err = abs(value - true_value) / abs(true_value)
                pair_err[(lx, ly)] = err
                heat_rows.append(
                    {
                        "replicate": rep,
                        "lambda_x": lx,
                        "lambda_y": ly,
                        "ot_rel_error": err,
                        "error_ratio_vs_naive": err / max(naive_err, 1e-30),
                    }
                )

        # criterion choices -> OT error at the chosen lambdas
        frame = pd.DataFrame(score_rows)
        chosen_rows = []

        def pick(side, criterion):
            sub = frame[frame["side"] == side]
            finite = sub[np.isfinite(sub[criterion])]
            if finite.empty:
                return None
            return float(finite.sort_values([criterion, "lambda"]).iloc[0]["lambda"])

        for criterion in ("frobenius", "bw"):
            lx, ly = pick("x", criterion), pick("y", criterion)
            if lx is None or ly is None:
                continue
            chosen_rows.append(
                {
                    "replicate": rep,
                    "criterion": criterion,
                    "lambda_x": lx,
                    "lambda_y": ly,
                    "ot_rel_error": pair_err[(lx, ly)],
                }
            )
        cross_frame = pd.DataFrame(cross_rows)
        finite = cross_frame[np.isfinite(cross_frame["cross_bw"])]
        if not finite.empty:
            lam = float(finite.sort_values(["cross_bw", "lambda"]).iloc[0]["lambda"])
            chosen_rows.append(
                {
                    "replicate": rep,
                    "criterion": "cross_bw",
                    "lambda_x": lam,
                    "lambda_y": lam,
                    "ot_rel_error": pair_err[(lam, lam)],
                }
            )
        best_pair = min(pair_err, key=pair_err.get)
        chosen_rows.append(
            {
                "replicate": rep,
                "criterion": "oracle",
                "lambda_x": best_pair[0],
                "lambda_y": best_pair[1],
                "ot_rel_error": pair_err[best_pair],
            }
        )
        chosen_rows.append(
            {
                "replicate": rep,
                "criterion": "zero_imputation",
                "lambda_x": np.nan,
                "lambda_y": np.nan,
                "ot_rel_error": naive_err,
            }
        )
        return score_rows, cross_rows, heat_rows, chosen_rows

    all_scores, all_cross, all_heat, all_chosen = [], [], [], []
    for scores, cross, heat, chosen in _map_replicates(one_replicate, config.replicates, threads):
        all_scores.extend(scores)
        all_cross.extend(cross)
        all_heat.extend(heat)
        all_chosen.extend(chosen)
    scores = pd.DataFrame(all_scores)
    heat = pd.DataFrame(all_heat)
    chosen = pd.DataFrame(all_chosen)
    heat_summary = _median_iqr(heat, ["lambda_x", "lambda_y"], "ot_rel_error")
    chosen_summary = _median_iqr(chosen, ["criterion"], "ot_rel_error")
    return write_outputs(
        out_dir,
        config.name,
        config,
        {
            "scores": scores,
            "cross_scores": pd.DataFrame(all_cross),
            "heatmap": heat,
            "heatmap_summary": heat_summary,
            "chosen": chosen,
            "chosen_summary": chosen_summary,
        },
    )
