"""Kernel-specific preprocessing: standard scaling, PCA, final rescaling.

Every transform is fit on training data only and applied with the stored
parameters, so train/test separation is structural.  The final rescale
depends on the kernel strategy: data that enters a circuit as rotation
angles is shrunk by 0.1, the randomized strategy gets a second standard
scaling followed by ``1/sqrt(M)`` (``M`` = post-PCA dimensionality), and the
classical RBF baseline is left untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ScalerParams",
    "PCAParams",
    "RescaleParams",
    "PreprocessParams",
    "fit_scaler",
    "apply_scaler",
    "fit_pca",
    "apply_pca",
    "fit_rescale",
    "apply_rescale",
    "kernel_rescale",
    "fit_preprocess",
    "apply_preprocess",
]

ANGLE_RESCALE_FACTOR = 0.1
_ANGLE_KINDS = ("exact", "inversion_test", "swap_test")


@dataclass(frozen=True)
class ScalerParams:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        if np.any(self.std <= 0):
            raise ValueError("std components must be positive")


@dataclass(frozen=True)
class PCAParams:
    mean: np.ndarray
    components: np.ndarray  # (d, m), orthonormal columns
    explained_variance: np.ndarray

    def __post_init__(self) -> None:
        gram = self.components.T @ self.components
        if np.max(np.abs(gram - np.eye(self.components.shape[1]))) > 1e-10:
            raise ValueError("PCA components must have orthonormal columns")


@dataclass(frozen=True)
class RescaleParams:
    kind: str
    factor: float
    scaler: ScalerParams | None = None


@dataclass(frozen=True)
class PreprocessParams:
    """Full fitted chain for one kernel kind: scaler, PCA, kind rescale."""

    kind: str
    scaler: ScalerParams
    pca: PCAParams
    rescale: RescaleParams


def fit_scaler(X_train: np.ndarray) -> ScalerParams:
    """Per-feature mean and population std; zero-variance features get std 1."""
    X_train = np.asarray(X_train, dtype=float)
    if X_train.ndim != 2 or X_train.shape[0] < 2:
        raise ValueError(f"need an (n, d) matrix with n >= 2, got shape {X_train.shape}")
    constant = np.ptp(X_train, axis=0) == 0
    mean = np.where(constant, X_train[0], X_train.mean(axis=0))
    std = X_train.std(axis=0)
    std = np.where(constant | (std <= 0), 1.0, std)
    return ScalerParams(mean=mean, std=std)


def apply_scaler(params: ScalerParams, X: np.ndarray) -> np.ndarray:
    return (np.asarray(X, dtype=float) - params.mean) / params.std


def fit_pca(X_train: np.ndarray, m: int) -> PCAParams:
    """Top-m right singular directions of the centered training matrix.

    Component signs are fixed so each column's largest-magnitude entry is
    positive, making results comparable across runs.
    """
    X_train = np.asarray(X_train, dtype=float)
    n, d = X_train.shape
    if not 1 <= m <= min(n - 1, d):
        raise ValueError(f"m must be in [1, min(n-1, d)] = [1, {min(n - 1, d)}], got {m}")
    mean = X_train.mean(axis=0)
    _, singular, vt = np.linalg.svd(X_train - mean, full_matrices=False)
    components = vt[:m].T.copy()
    for col in range(m):
        peak = np.argmax(np.abs(components[:, col]))
        if components[peak, col] < 0:
            components[:, col] *= -1.0
    explained = singular[:m] ** 2 / (n - 1)
    return PCAParams(mean=mean, components=components, explained_variance=explained)


def apply_pca(params: PCAParams, X: np.ndarray) -> np.ndarray:
    return (np.asarray(X, dtype=float) - params.mean) @ params.components


def fit_rescale(X_train: np.ndarray, kind: str) -> RescaleParams:
    """Fit the kind-specific final rescale on (post-PCA) training data."""
    X_train = np.asarray(X_train, dtype=float)
    if kind in _ANGLE_KINDS:
        return RescaleParams(kind=kind, factor=ANGLE_RESCALE_FACTOR)
    if kind == "randomized":
        scaler = fit_scaler(X_train)
        return RescaleParams(kind=kind, factor=1.0 / np.sqrt(X_train.shape[1]), scaler=scaler)
    if kind == "rbf":
        return RescaleParams(kind=kind, factor=1.0)
    raise ValueError(f"unknown kernel kind {kind!r}")


def apply_rescale(params: RescaleParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if params.kind == "rbf":
        return X
    if params.scaler is not None:
        X = apply_scaler(params.scaler, X)
    return X * params.factor


def kernel_rescale(X: np.ndarray, kind: str) -> np.ndarray:
    """Fit-and-apply convenience for training matrices."""
    return apply_rescale(fit_rescale(X, kind), X)


def fit_preprocess(X_train: np.ndarray, kind: str, num_features: int) -> PreprocessParams:
    """Fit the full chain scaler -> PCA(num_features) -> kind rescale."""
    scaler = fit_scaler(X_train)
    scaled = apply_scaler(scaler, X_train)
    pca = fit_pca(scaled, num_features)
    reduced = apply_pca(pca, scaled)
    rescale = fit_rescale(reduced, kind)
    return PreprocessParams(kind=kind, scaler=scaler, pca=pca, rescale=rescale)


def apply_preprocess(params: PreprocessParams, X: np.ndarray) -> np.ndarray:
    return apply_rescale(params.rescale, apply_pca(params.pca, apply_scaler(params.scaler, X)))
