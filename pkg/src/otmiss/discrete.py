"""Discrete optimal transport: Mahalanobis costs, an exact solver, log-domain
Sinkhorn, coupling divergences, the expected zero-imputed cost, and the
cost-sensitivity constants.

Marginal convention: couplings have total mass 1 (row sums 1/n, column sums
1/m), which makes values comparable across sample sizes.

Entropy convention: reported entropic values use the plain coupling entropy
``sum_ij pi_ij log pi_ij``.  This differs from the KL-to-product-of-marginals
convention by the constant ``eps * log(n*m)`` (uniform marginals); use
:meth:`OtSolution.value_kl_convention` to convert.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.optimize import linear_sum_assignment, linprog
from scipy.special import logsumexp

__all__ = [
    "CostMatrix",
    "Coupling",
    "OtSolution",
    "SensitivityConstants",
    "cost_matrix",
    "solve_exact_ot",
    "sinkhorn",
    "coupling_kl",
    "implicit_cost",
    "sensitivity_constants",
    "coupling_edge_list",
    "write_coupling_csv",
]

MARGINAL_TOL = 1e-8


@dataclass(frozen=True)
class CostMatrix:
    """Pairwise cost matrix with its metric and cached extremes.

    Built by :func:`cost_matrix` (squared Mahalanobis costs, nonnegative) or
    :func:`implicit_cost` (expected zero-imputed costs)."""

    entries: np.ndarray
    metric: np.ndarray
    c_min: float = 0.0
    c_max: float = 0.0

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.ndim != 2:
            raise ValueError("cost entries must be a 2-D matrix")
        if not np.isfinite(e).all():
            raise ValueError("cost entries must be finite")
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "c_min", float(e.min()))
        object.__setattr__(self, "c_max", float(e.max()))

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


@dataclass(frozen=True)
class Coupling:
    """Transport plan with uniform marginals (rows 1/n, columns 1/m)."""

    plan: np.ndarray

    def __post_init__(self):
        pl = np.asarray(self.plan, dtype=float)
        if pl.ndim != 2:
            raise ValueError("plan must be a 2-D matrix")
        object.__setattr__(self, "plan", pl)

    @property
    def shape(self) -> tuple[int, int]:
        return self.plan.shape

    def marginal_violation(self) -> float:
        n, m = self.plan.shape
        row = np.abs(self.plan.sum(axis=1) - 1.0 / n).max()
        col = np.abs(self.plan.sum(axis=0) - 1.0 / m).max()
        return float(max(row, col))

    def validate(self, tol: float = MARGINAL_TOL) -> None:
        if self.plan.min(initial=0.0) < -tol:
            raise ValueError("coupling has negative mass")
        v = self.marginal_violation()
        if v > tol:
            raise ValueError(f"marginal violation {v:.3e} exceeds {tol:.0e}")


@dataclass(frozen=True)
class OtSolution:
    """Solver output: coupling, objective value, and convergence metadata.

    ``value = transport_cost + eps * entropy`` where ``entropy`` is the plain
    coupling entropy (0 for the exact solver where eps = 0).
    """

    coupling: Coupling
    value: float
    transport_cost: float
    entropy: float
    converged: bool
    iterations: int
    eps: float = 0.0
    dual_trace: np.ndarray | None = None

    def value_kl_convention(self) -> float:
        """Entropic value under the KL-to-product-of-marginals convention
        (adds ``eps * log(n*m)``); matches the Gaussian closed form."""
        if self.eps <= 0:
            raise ValueError("KL-convention value is only defined for eps > 0")
        n, m = self.coupling.shape
        return self.value + self.eps * math.log(n * m)


def cost_matrix(X: np.ndarray, Y: np.ndarray, M: np.ndarray | None = None) -> CostMatrix:
    """Squared Mahalanobis costs ``(x_i - y_j)^T M (x_i - y_j)``; M = identity
    gives squared Euclidean distances."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    d = X.shape[1]
    if Y.shape[1] != d:
        raise ValueError("X and Y must share the feature dimension")
    if M is None:
        M = np.eye(d)
    M = np.asarray(M, dtype=float)
    _check_psd_metric(M, d)
    diff = X[:, None, :] - Y[None, :, :]
    entries = np.einsum("ijk,kl,ijl->ij", diff, M, diff)
    # roundoff can leave -1e-17 on the diagonal of X vs X
    return CostMatrix(np.clip(entries, 0.0, None), M)


def _check_psd_metric(M: np.ndarray, d: int) -> None:
    if M.shape != (d, d):
        raise ValueError(f"metric must be {d}x{d}")
    if np.abs(M - M.T).max(initial=0.0) > 1e-10 * max(1.0, np.abs(M).max(initial=1.0)):
        raise ValueError("metric must be symmetric")
    w = np.linalg.eigvalsh((M + M.T) / 2.0)
    if w[0] < -1e-10 * max(float(w[-1]), 1.0):
        raise ValueError("metric must be PSD")


def solve_exact_ot(cost: CostMatrix, max_iter: int | None = None) -> OtSolution:
    """Exact uniform-marginal transportation problem.

    For n = m an optimal vertex is a permutation matrix divided by n, so the
    assignment solver gives the exact optimum; rectangular instances go
    through the HiGHS LP solver.
    """
    C = cost.entries
    n, m = C.shape
    if n == m:
        rows, cols = linear_sum_assignment(C)
        plan = np.zeros_like(C)
        plan[rows, cols] = 1.0 / n
        transport = float(C[rows, cols].sum() / n)
        return OtSolution(Coupling(plan), transport, transport, 0.0, True, 0)

    a_rows = sparse.kron(sparse.eye(n), np.ones((1, m)), format="csr")
    a_cols = sparse.kron(np.ones((1, n)), sparse.eye(m), format="csr")
    A_eq = sparse.vstack([a_rows, a_cols], format="csr")
    b_eq = np.concatenate([np.full(n, 1.0 / n), np.full(m, 1.0 / m)])
    options = {} if max_iter is None else {"maxiter": max_iter}
    res = linprog(C.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs", options=options)
    if res.status == 1 and res.x is not None:
        plan = np.clip(res.x.reshape(n, m), 0.0, None)
        transport = float((plan * C).sum())
        return OtSolution(Coupling(plan), transport, transport, 0.0, False, int(res.nit))
    if not res.success:
        raise RuntimeError(f"exact OT solver failed: {res.message}")
    plan = np.clip(res.x.reshape(n, m), 0.0, None)
    transport = float((plan * C).sum())
    return OtSolution(Coupling(plan), transport, transport, 0.0, True, int(res.nit))


def _plan_entropy(plan: np.ndarray) -> float:
    pos = plan > 0
    return float((plan[pos] * np.log(plan[pos])).sum())


def sinkhorn(
    cost: CostMatrix,
    eps: float,
    tol: float = 1e-9,
    max_iter: int = 100_000,
) -> OtSolution:
    """Log-domain Sinkhorn for the entropy-regularized problem.

    Iterates until the L-infinity marginal violation drops below ``tol``.
    The returned ``dual_trace`` holds the dual objective after every full
    iteration; exact alternating maximization makes it nondecreasing.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    C = cost.entries
    n, m = C.shape
    log_a = -math.log(n)
    log_b = -math.log(m)
    f = np.zeros(n)
    g = np.zeros(m)
    duals: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        f = -eps * logsumexp((g[None, :] - C) / eps + log_b, axis=1)
        g = -eps * logsumexp((f[:, None] - C) / eps + log_a, axis=0)
        log_plan = (f[:, None] + g[None, :] - C) / eps + log_a + log_b
        plan = np.exp(log_plan)
        mass = plan.sum()
        duals.append(f.mean() + g.mean() - eps * (mass - 1.0))
        row_err = np.abs(plan.sum(axis=1) - 1.0 / n).max()
        col_err = np.abs(plan.sum(axis=0) - 1.0 / m).max()
        if max(row_err, col_err) < tol:
            converged = True
            break
    transport = float((plan * C).sum())
    entropy = _plan_entropy(plan)
    coupling = Coupling(plan)
    if converged:
        coupling.validate(max(tol * 10, MARGINAL_TOL))
    return OtSolution(
        coupling,
        transport + eps * entropy,
        transport,
        entropy,
        converged,
        it,
        eps=eps,
        dual_trace=np.asarray(duals),
    )


def coupling_kl(p: Coupling, q: Coupling) -> float:
    """``sum p_ij log(p_ij / q_ij)``; requires q > 0 on the support of p."""
    if p.shape != q.shape:
        raise ValueError("couplings must share a shape")
    support = p.plan > 0
    if (q.plan[support] <= 0).any():
        raise ValueError("support violation: q has zero mass where p is positive")
    val = float((p.plan[support] * np.log(p.plan[support] / q.plan[support])).sum())
    return 0.0 if -1e-12 < val < 0 else val


def implicit_cost(
    X: np.ndarray,
    Y: np.ndarray,
    M: np.ndarray | None = None,
    p: np.ndarray | float = 1.0,
    q: np.ndarray | float = 1.0,
) -> CostMatrix:
    """Expected cost matrix of the zero-imputed samples, ``E[C^NA | X, Y]``.

    With P = diag(p), Q = diag(q) and Mbar = M - PMQ,

        ``E[C^NA]_ij = C_ij + r_i + s_j + 2 x_i^T Mbar y_j``

    where r, s are per-row/per-column quadratics that do not affect the
    optimal coupling.  Exact OT on this matrix therefore recovers the
    coupling (and expected value) of naive imputation in the mask average.
    p = q = 1 returns the plain cost matrix exactly.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    d = X.shape[1]
    if M is None:
        M = np.eye(d)
    M = np.asarray(M, dtype=float)
    _check_psd_metric(M, d)
    p = np.broadcast_to(np.asarray(p, dtype=float), (d,))
    q = np.broadcast_to(np.asarray(q, dtype=float), (d,))

    def quad_form(Z, probs):
        # E[(z o w)^T M (z o w)] = z^T (PMP + P diag(M)(I-P)) z
        A = M * np.outer(probs, probs)
        A = A + np.diag(probs * (1.0 - probs) * np.diag(M))
        return np.einsum("ij,jk,ik->i", Z, A, Z)

    row = quad_form(X, p)
    col = quad_form(Y, q)
    cross = X @ (M * np.outer(p, q)) @ Y.T
    entries = row[:, None] + col[None, :] - 2.0 * cross
    return CostMatrix(entries, M)


@dataclass(frozen=True)
class SensitivityConstants:
    """Cost-sensitivity constants, kept in log space to survive small eps:
    ``log K_eps = (2 c_max - c_min)/eps`` and
    ``log K'_eps = (3 c_max - 7 c_min)/(2 eps)``."""

    log_k_eps: float
    log_k_eps_prime: float

    @property
    def k_eps(self) -> float:
        try:
            return math.exp(self.log_k_eps)
        except OverflowError:
            return math.inf

    @property
    def k_eps_prime(self) -> float:
        try:
            return math.exp(self.log_k_eps_prime)
        except OverflowError:
            return math.inf


def sensitivity_constants(cost: CostMatrix, eps: float) -> SensitivityConstants:
    if eps <= 0:
        raise ValueError("eps must be > 0")
    return SensitivityConstants(
        (2.0 * cost.c_max - cost.c_min) / eps,
        (3.0 * cost.c_max - 7.0 * cost.c_min) / (2.0 * eps),
    )


def coupling_edge_list(coupling: Coupling, quantile: float = 0.75) -> np.ndarray:
    """Edges (i, j, mass) whose mass is at or above the given quantile of the
    positive masses; quantile 0.75 keeps the top 25% of links."""
    if not 0.0 <= quantile <= 1.0:
        raise ValueError("quantile must lie in [0, 1]")
    plan = coupling.plan
    positive = plan[plan > 0]
    if positive.size == 0:
        return np.empty((0, 3))
    threshold = np.quantile(positive, quantile)
    i, j = np.nonzero(plan >= threshold)
    return np.column_stack([i, j, plan[i, j]])


def write_coupling_csv(path: str | Path, coupling: Coupling) -> None:
    m = coupling.shape[1]
    pd.DataFrame(coupling.plan, columns=[f"y{j}" for j in range(m)]).to_csv(
        path, index=False, encoding="utf-8"
    )
