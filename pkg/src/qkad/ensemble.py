"""Variable-subsampling ensembles with optional rotated feature bagging.

Each component trains a one-class SVM on a random subsample whose size is
itself random (inclusive uniform between ``n_min`` and ``n_max``), sampled
without replacement.  With feature bagging enabled, each component first
projects its subsample onto a private random orthonormal axis system of
``rotation_dim(d)`` columns; the projection matrix is stored and reused at
scoring time.  Component scores are z-normalized against the component's own
training-score statistics and aggregated by mean or max.

The component count follows ``floor(n / 100)`` (at least 1) unless a fixed
count is configured.  All subsample sizes, indices, projections and child
random streams are drawn serially from the caller's generator in component
order, so the fitted ensemble is a pure function of (seed, config, data) and
components could be fitted concurrently without changing results.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from . import ocsvm
from .kernel import GramMatrix, KernelConfig, SignatureCache, build_gram_cross, build_gram_train
from .ocsvm import OCSVMModel, SolverConfig
from .statevec import FeatureMapConfig

__all__ = [
    "VSConfig",
    "Component",
    "EnsembleModel",
    "sample_sizes",
    "rotation_dim",
    "random_rotation",
    "fit_vs",
    "score_vs",
    "cross_eval_count",
]

_STD_FLOOR = 1e-12
_ROTATION_RETRIES = 8


@dataclass(frozen=True)
class VSConfig:
    base_kernel: KernelConfig
    nu: float
    n_min: int = 50
    n_max: int = 100
    component_count: int | None = None  # None -> floor(n/100), at least 1
    aggregation: str = "mean"
    rfb_enabled: bool = False
    solver: SolverConfig = SolverConfig()

    def __post_init__(self) -> None:
        if not 50 <= self.n_min <= self.n_max:
            raise ValueError(
                f"need 50 <= n_min <= n_max, got n_min={self.n_min}, n_max={self.n_max}"
            )
        if self.component_count is not None and self.component_count < 1:
            raise ValueError("component_count must be >= 1 when fixed")
        if self.aggregation not in ("mean", "max"):
            raise ValueError(f"aggregation must be 'mean' or 'max', got {self.aggregation!r}")
        if not 0 < self.nu <= 1:
            raise ValueError(f"nu must be in (0, 1], got {self.nu}")


@dataclass(frozen=True)
class Component:
    """One fitted base detector plus everything needed to score new data."""

    subsample_indices: np.ndarray
    train_matrix: np.ndarray  # subsample after optional projection
    projection: np.ndarray | None
    kernel: KernelConfig
    model: OCSVMModel
    train_score_mean: float
    train_score_std: float
    cache: SignatureCache | None
    score_seed: int
    train_eval_count: int


@dataclass(frozen=True)
class EnsembleModel:
    components: tuple[Component, ...]
    aggregation: str
    num_features: int  # feature count the ensemble was fitted on
    gram_time_s: float
    solver_time_s: float

    def __post_init__(self) -> None:
        if len(self.components) < 1:
            raise ValueError("an ensemble needs at least one component")

    @property
    def train_eval_count(self) -> int:
        return sum(c.train_eval_count for c in self.components)


def component_count(n: int, cfg: VSConfig) -> int:
    if cfg.component_count is not None:
        return cfg.component_count
    return max(1, n // 100)


def sample_sizes(c: int, n_min: int, n_max: int, rng: np.random.Generator) -> list[int]:
    """c i.i.d. subsample sizes, uniform on the inclusive range [n_min, n_max]."""
    if c < 1:
        raise ValueError(f"c must be >= 1, got {c}")
    if n_min > n_max or n_min < 1:
        raise ValueError(f"invalid size range [{n_min}, {n_max}]")
    return [int(s) for s in rng.integers(n_min, n_max + 1, size=c)]


def rotation_dim(d: int) -> int:
    """Projected dimensionality ``2 + ceil(sqrt(d)/2)``, clamped to ``d``."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    return min(d, 2 + math.ceil(math.sqrt(d) / 2.0))


def random_rotation(d: int, r_prime: int, rng: np.random.Generator) -> np.ndarray:
    """Random orthonormal d x r' projection from a uniform [-1, 1] draw.

    Columns of a uniform random matrix are orthonormalized by modified
    Gram-Schmidt; a numerically rank-deficient draw (probability zero) is
    redrawn a bounded number of times.
    """
    if not 1 <= r_prime <= d:
        raise ValueError(f"need 1 <= r_prime <= d, got r_prime={r_prime}, d={d}")
    for _ in range(_ROTATION_RETRIES):
        y = rng.uniform(-1.0, 1.0, size=(d, r_prime))
        basis = _gram_schmidt(y)
        if basis is not None:
            return basis
    raise RuntimeError(f"could not draw a rank-{r_prime} projection in {_ROTATION_RETRIES} tries")


def _gram_schmidt(y: np.ndarray) -> np.ndarray | None:
    d, r_prime = y.shape
    basis = np.empty((d, r_prime))
    for col in range(r_prime):
        v = y[:, col].copy()
        for prev in range(col):
            v -= np.dot(basis[:, prev], v) * basis[:, prev]
        # second orthogonalization pass keeps the basis orthonormal to 1e-14
        for prev in range(col):
            v -= np.dot(basis[:, prev], v) * basis[:, prev]
        norm = np.linalg.norm(v)
        if norm < 1e-10:
            return None
        basis[:, col] = v / norm
    return basis


def fit_vs(X_train: np.ndarray, cfg: VSConfig, rng: np.random.Generator) -> EnsembleModel:
    """Fit a variable-subsampling ensemble on preprocessed training data."""
    X_train = np.asarray(X_train, dtype=float)
    n, d = X_train.shape
    if n < cfg.n_min:
        raise ValueError(f"need at least n_min={cfg.n_min} training points, got {n}")

    c = component_count(n, cfg)
    sizes = [min(s, n) for s in sample_sizes(c, cfg.n_min, cfg.n_max, rng)]
    draws = []
    for size in sizes:
        indices = rng.choice(n, size=size, replace=False)
        projection = None
        if cfg.rfb_enabled:
            projection = random_rotation(d, rotation_dim(d), rng)
        fit_seed = int(rng.integers(0, 2**63 - 1))
        solver_seed = int(rng.integers(0, 2**63 - 1))
        score_seed = int(rng.integers(0, 2**63 - 1))
        draws.append((indices, projection, fit_seed, solver_seed, score_seed))

    components: list[Component] = []
    gram_time = 0.0
    solver_time = 0.0
    for idx, (indices, projection, fit_seed, solver_seed, score_seed) in enumerate(draws):
        try:
            sub = X_train[indices]
            if projection is not None:
                sub = sub @ projection
            comp_kernel = _sized_kernel(cfg.base_kernel, sub.shape[1])

            t0 = time.perf_counter()
            gram, cache = build_gram_train(sub, comp_kernel, np.random.default_rng(fit_seed))
            t1 = time.perf_counter()
            model = ocsvm.fit(gram, cfg.nu, cfg.solver, np.random.default_rng(solver_seed))
            t2 = time.perf_counter()
            gram_time += t1 - t0
            solver_time += t2 - t1

            train_scores = ocsvm.decision_scores(model, _as_cross(gram))
            components.append(
                Component(
                    subsample_indices=indices,
                    train_matrix=sub,
                    projection=projection,
                    kernel=comp_kernel,
                    model=model,
                    train_score_mean=float(train_scores.mean()),
                    train_score_std=float(train_scores.std()),
                    cache=cache,
                    score_seed=score_seed,
                    train_eval_count=gram.eval_count,
                )
            )
        except Exception as exc:
            raise RuntimeError(f"ensemble component {idx} failed to fit") from exc

    return EnsembleModel(
        components=tuple(components),
        aggregation=cfg.aggregation,
        num_features=d,
        gram_time_s=gram_time,
        solver_time_s=solver_time,
    )


def _sized_kernel(base: KernelConfig, width: int) -> KernelConfig:
    """Base kernel config with the feature map resized to the component width."""
    if base.feature_map is None:
        return base
    if base.feature_map.num_qubits == width:
        return base
    return replace(base, feature_map=replace(base.feature_map, num_qubits=width))


def _as_cross(gram: GramMatrix) -> GramMatrix:
    """Reinterpret a training Gram as the train-vs-train prediction matrix."""
    return GramMatrix(entries=gram.entries, symmetric=False, eval_count=0)


def _component_scores(comp: Component, X_test: np.ndarray) -> np.ndarray:
    X_proj = X_test @ comp.projection if comp.projection is not None else X_test
    cross = build_gram_cross(
        X_proj,
        comp.train_matrix,
        comp.kernel,
        rng=np.random.default_rng(comp.score_seed),
        cache=comp.cache,
    )
    raw = ocsvm.decision_scores(comp.model, cross)
    std = comp.train_score_std if comp.train_score_std >= _STD_FLOOR else 1.0
    return (raw - comp.train_score_mean) / std


def score_vs(model: EnsembleModel, X_test: np.ndarray) -> np.ndarray:
    """Aggregated normalized decision scores; negative means anomaly.

    Scoring is repeatable: each component reuses the measurement stream seed
    stored at fit time, so calling twice gives identical scores.
    """
    X_test = np.asarray(X_test, dtype=float)
    if X_test.ndim != 2 or X_test.shape[1] != model.num_features:
        raise ValueError(
            f"expected (t, {model.num_features}) test matrix, got shape {X_test.shape}"
        )
    stacked = np.stack([_component_scores(comp, X_test) for comp in model.components])
    if model.aggregation == "mean":
        return stacked.mean(axis=0)
    return stacked.max(axis=0)


def cross_eval_count(model: EnsembleModel, n_test: int) -> int:
    """Kernel evaluations a scoring pass over ``n_test`` points performs."""
    total = 0
    for comp in model.components:
        kind = comp.kernel.kind
        if kind == "randomized":
            total += n_test * comp.kernel.rm_settings
        elif kind == "rbf":
            total += 0
        else:
            total += n_test * comp.train_matrix.shape[0]
    return total
