"""nu-one-class SVM on precomputed kernel matrices.

Solves the dual problem

    min_alpha  1/2 alpha^T G alpha
    s.t.       0 <= alpha_i <= 1/(nu n),   sum_i alpha_i = 1

by pairwise coordinate updates: each step picks the pair with the largest
KKT violation (ties broken at random from the caller's seeded stream) and
moves mass between the two coordinates, which keeps both constraints intact.
On indefinite inputs, which shot-noise kernels can produce, any update that
would increase the objective is rejected and the pair is set aside until the
next accepted update; the iteration cap then guarantees termination.

The offset ``rho`` is the mean of ``(G alpha)_i`` over margin support vectors
(coefficients strictly inside the box, with 1e-8 slack), falling back to the
mean over all support vectors when no coefficient is strictly inside.  New
points score as ``sum_i alpha_i K(x_new, x_i) - rho``; negative means anomaly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .kernel import GramMatrix

__all__ = [
    "OCSVMModel",
    "SolverConfig",
    "fit",
    "decision_scores",
    "predict",
    "dual_objective",
]

logger = logging.getLogger(__name__)

SUPPORT_THRESHOLD = 1e-8


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-3
    max_iterations: int = 100_000
    track_objective: bool = False

    def __post_init__(self) -> None:
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")


@dataclass(frozen=True)
class OCSVMModel:
    """Fitted dual solution over a fixed training kernel."""

    alphas: np.ndarray
    support_indices: np.ndarray
    rho: float
    nu: float
    n_train: int
    converged: bool
    iterations: int
    objective_history: tuple[float, ...] | None = None


def dual_objective(G: np.ndarray, alpha: np.ndarray) -> float:
    """Value of ``1/2 alpha^T G alpha``."""
    return float(0.5 * alpha @ (G @ alpha))


def _initial_alpha(n: int, nu: float) -> np.ndarray:
    """Feasible start: first floor(nu n) coordinates at the box cap."""
    cap = 1.0 / (nu * n)
    alpha = np.zeros(n)
    full = int(np.floor(nu * n))
    alpha[:full] = cap
    if full < n:
        alpha[full] = 1.0 - full * cap
    return alpha


def _choose(candidates: np.ndarray, rng: np.random.Generator) -> int:
    if candidates.size == 1:
        return int(candidates[0])
    return int(rng.choice(candidates))


def _compute_rho(G: np.ndarray, alpha: np.ndarray, cap: float) -> float:
    margins = G @ alpha
    support = alpha > SUPPORT_THRESHOLD
    interior = support & (alpha < cap - SUPPORT_THRESHOLD)
    chosen = interior if np.any(interior) else support
    return float(margins[chosen].mean())


def fit(
    gram: GramMatrix,
    nu: float,
    cfg: SolverConfig = SolverConfig(),
    rng: np.random.Generator | None = None,
) -> OCSVMModel:
    """Solve the dual on a symmetric training Gram.

    Raises on non-square or asymmetric input and on infeasible ``nu``
    (``nu * n < 1`` leaves no feasible point).  Hitting the iteration cap
    returns a model with ``converged=False`` and logs a warning; it never
    fails silently.
    """
    if not gram.symmetric:
        raise ValueError("training Gram must be symmetric")
    G = gram.entries
    n = G.shape[0]
    if not 0 < nu <= 1:
        raise ValueError(f"nu must be in (0, 1], got {nu}")
    if nu * n < 1:
        raise ValueError(f"infeasible nu: nu*n = {nu * n} < 1")
    if rng is None:
        rng = np.random.default_rng(0)

    cap = 1.0 / (nu * n)
    alpha = _initial_alpha(n, nu)
    grad = G @ alpha
    history: list[float] | None = [dual_objective(G, alpha)] if cfg.track_objective else None

    excluded = np.zeros((n, n), dtype=bool)
    converged = False
    iterations = 0
    while iterations < cfg.max_iterations:
        up = alpha < cap
        low = alpha > 0.0
        if not np.any(up) or not np.any(low):
            converged = True
            break
        neg_grad = -grad
        up_best = np.max(neg_grad[up])
        low_best = np.min(neg_grad[low])
        if up_best - low_best <= cfg.tolerance:
            converged = True
            break

        up_idx = np.flatnonzero(up & (neg_grad == up_best))
        low_idx = np.flatnonzero(low & (neg_grad == low_best))
        i = _choose(up_idx, rng)
        j = _choose(low_idx, rng)
        if excluded[i, j]:
            # the best pair was rejected earlier this sweep; take the best
            # non-excluded one, or give up the sweep entirely
            pair = _best_allowed_pair(neg_grad, up, low, excluded, cfg.tolerance)
            if pair is None:
                break
            i, j = pair

        iterations += 1
        quad = G[i, i] + G[j, j] - 2.0 * G[i, j]
        room = min(cap - alpha[i], alpha[j])
        gap = neg_grad[i] - neg_grad[j]
        if quad > 0:
            step = min(gap / quad, room)
        else:
            step = room
        delta_obj = -gap * step + 0.5 * quad * step * step
        if delta_obj > 0 or step <= 0:
            excluded[i, j] = True
            continue

        alpha[i] += step
        alpha[j] -= step
        if cap - alpha[i] < 1e-12 * cap:
            alpha[i] = cap
        if alpha[j] < 1e-12 * cap:
            alpha[j] = 0.0
        grad = grad + step * (G[:, i] - G[:, j])
        if excluded.any():
            excluded[:] = False
        if history is not None:
            history.append(dual_objective(G, alpha))

    if not converged:
        logger.warning(
            "OC-SVM solver stopped after %d updates without reaching KKT tolerance %g",
            iterations,
            cfg.tolerance,
        )

    rho = _compute_rho(G, alpha, cap)
    support = np.flatnonzero(alpha > SUPPORT_THRESHOLD)
    return OCSVMModel(
        alphas=alpha,
        support_indices=support,
        rho=rho,
        nu=nu,
        n_train=n,
        converged=converged,
        iterations=iterations,
        objective_history=tuple(history) if history is not None else None,
    )


def _best_allowed_pair(
    neg_grad: np.ndarray,
    up: np.ndarray,
    low: np.ndarray,
    excluded: np.ndarray,
    tolerance: float,
) -> tuple[int, int] | None:
    """Most violating (i, j) pair that has not been rejected this sweep."""
    up_idx = np.flatnonzero(up)
    low_idx = np.flatnonzero(low)
    order_i = up_idx[np.argsort(-neg_grad[up_idx], kind="stable")]
    order_j = low_idx[np.argsort(neg_grad[low_idx], kind="stable")]
    for i in order_i:
        for j in order_j:
            if neg_grad[i] - neg_grad[j] <= tolerance:
                break  # later j only shrink the violation; try the next i
            if not excluded[i, j] and i != j:
                return int(i), int(j)
    return None


def decision_scores(model: OCSVMModel, cross: GramMatrix) -> np.ndarray:
    """Scores ``sum_i alpha_i K(x_k, x_i) - rho`` for each row of ``cross``."""
    if cross.cols != model.n_train:
        raise ValueError(
            f"cross Gram has {cross.cols} columns, model was trained on {model.n_train} points"
        )
    return cross.entries @ model.alphas - model.rho


def predict(scores: np.ndarray) -> np.ndarray:
    """Label scores: 1 (anomaly) when negative, 0 (normal) otherwise."""
    scores = np.asarray(scores, dtype=float)
    return (scores < 0).astype(np.int64)
