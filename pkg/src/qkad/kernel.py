"""Kernel evaluation strategies and Gram matrix assembly.

Five interchangeable ways to fill a kernel matrix over feature-map states:

* ``exact``          - noiseless squared overlap of simulated states.
* ``inversion_test`` - frequency of the all-zeros outcome after running the
  encoding circuit for one point followed by the adjoint circuit for the
  other; an unbiased shot-noise estimator of the exact value.
* ``swap_test``      - ancilla statistics of the controlled-swap circuit,
  sampled from the analytically computed ancilla distribution.
* ``randomized``     - one measurement record per data point in ``r`` shared
  random local bases, combined pairwise by Hamming-weighted cross
  correlations; optional purity-based mitigation.
* ``rbf``            - classical Gaussian kernel baseline.

Randomized-measurement post-processing is vectorized over a cached
``(-2)**(-H)`` coefficient table of size ``2^d x 2^d``, so it stays cheap for
the qubit counts this package targets (d up to roughly 12).

Shot-based entries may leave [0, 1]; they are never clipped silently.
:func:`clip_gram_psd` is the explicit, logged repair step for indefinite
matrices.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .statevec import (
    FeatureMapConfig,
    LocalHaarSetting,
    Statevector,
    apply_iqp_adjoint,
    apply_local,
    born_counts,
    encode_iqp,
    inner_product,
    sample_haar_setting,
)

__all__ = [
    "KernelConfig",
    "RMSignature",
    "GramMatrix",
    "SignatureCache",
    "DegenerateSignatureError",
    "KERNEL_KINDS",
    "exact_fidelity",
    "inversion_test",
    "swap_test",
    "swap_test_states",
    "collect_signature",
    "hamming",
    "rm_kernel_entry",
    "rm_purity",
    "mitigate",
    "rbf_entry",
    "rbf_auto_gamma",
    "build_gram_train",
    "build_gram_cross",
    "clip_gram_psd",
    "save_signature_cache",
    "load_signature_cache",
]

logger = logging.getLogger(__name__)

KERNEL_KINDS = ("exact", "inversion_test", "swap_test", "randomized", "rbf")

_SIGNATURE_CACHE_VERSION = 1


class DegenerateSignatureError(ValueError):
    """A measurement record yielded an unusable (nonpositive) purity estimate."""


@dataclass(frozen=True)
class RMSignature:
    """Randomized-measurement record of one data point.

    ``counts[m, s]`` is the number of shots that produced basis state ``s``
    under measurement setting ``m``; every row sums to ``shots_per_setting``.
    """

    num_qubits: int
    counts: np.ndarray  # (r, 2^d) integer shot counts
    shots_per_setting: int

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or counts.shape[1] != 2**self.num_qubits:
            raise ValueError(
                f"counts must have shape (r, 2**{self.num_qubits}), got {counts.shape}"
            )
        if self.shots_per_setting < 1:
            raise ValueError("shots_per_setting must be >= 1")
        if np.any(counts < 0) or np.any(counts.sum(axis=1) != self.shots_per_setting):
            raise ValueError("each setting's counts must be nonnegative and sum to the shot count")
        object.__setattr__(self, "counts", counts)

    @property
    def num_settings(self) -> int:
        return self.counts.shape[0]

    @property
    def frequencies(self) -> np.ndarray:
        """Empirical outcome distributions, one row per setting."""
        return self.counts / float(self.shots_per_setting)


@dataclass(frozen=True)
class GramMatrix:
    """Kernel matrix plus bookkeeping of how many circuit runs produced it."""

    entries: np.ndarray
    symmetric: bool
    eval_count: int

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2:
            raise ValueError(f"entries must be a matrix, got shape {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise ValueError("Gram entries must be finite")
        if self.symmetric:
            if entries.shape[0] != entries.shape[1]:
                raise ValueError("symmetric Gram must be square")
            if not np.array_equal(entries, entries.T):
                raise ValueError("symmetric flag set but entries differ from transpose")
        object.__setattr__(self, "entries", entries)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class KernelConfig:
    """Which kernel to evaluate and the shot budgets to spend on it."""

    kind: str
    feature_map: FeatureMapConfig | None = None
    it_shots: int = 1000
    rm_settings: int = 30
    rm_shots: int = 9000
    mitigate: bool = True
    rbf_gamma: float | str = "auto"
    clip_psd: bool = False

    def __post_init__(self) -> None:
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}, expected one of {KERNEL_KINDS}")
        if self.it_shots < 1 or self.rm_shots < 1:
            raise ValueError("shot counts must be >= 1")
        if self.kind == "randomized" and self.rm_settings < 2:
            raise ValueError("randomized kernel needs rm_settings >= 2")
        if self.kind != "rbf" and self.feature_map is None:
            raise ValueError(f"kernel kind {self.kind!r} requires a feature_map")
        if isinstance(self.rbf_gamma, str):
            if self.rbf_gamma != "auto":
                raise ValueError(f"rbf_gamma must be positive or 'auto', got {self.rbf_gamma!r}")
        elif not self.rbf_gamma > 0:
            raise ValueError(f"rbf_gamma must be positive or 'auto', got {self.rbf_gamma!r}")


@dataclass(frozen=True)
class SignatureCache:
    """Measurement settings and per-point records persisted from training.

    Prediction-time kernels against the training set must reuse exactly these
    settings, so the cache travels with the fitted model.
    """

    settings: tuple[LocalHaarSetting, ...]
    signatures: tuple[RMSignature, ...]
    purities: np.ndarray

    @property
    def num_qubits(self) -> int:
        return self.settings[0].num_qubits

    @property
    def num_settings(self) -> int:
        return len(self.settings)

    @property
    def shots_per_setting(self) -> int:
        return self.signatures[0].shots_per_setting


# ---------------------------------------------------------------------------
# pairwise fidelity estimators
# ---------------------------------------------------------------------------


def exact_fidelity(x: np.ndarray, x_other: np.ndarray, fm: FeatureMapConfig) -> float:
    """Squared overlap of the two feature-map states."""
    a = encode_iqp(x, fm)
    b = encode_iqp(x_other, fm)
    return float(abs(inner_product(b, a)) ** 2)


def inversion_test(
    x: np.ndarray,
    x_other: np.ndarray,
    fm: FeatureMapConfig,
    shots: int,
    rng: np.random.Generator,
) -> float:
    """All-zeros frequency of the encode-then-uncompute circuit.

    Runs the encoding circuit for ``x`` followed by the adjoint circuit for
    ``x_other`` and samples the all-zeros outcome ``shots`` times.  Identical
    inputs short-circuit to exactly 1.0 since the composition is the identity.
    """
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    if np.array_equal(np.asarray(x, float), np.asarray(x_other, float)):
        return 1.0
    composed = apply_iqp_adjoint(encode_iqp(x, fm), x_other, fm)
    p_zero = min(max(float(abs(composed.amplitudes[0]) ** 2), 0.0), 1.0)
    return int(rng.binomial(shots, p_zero)) / shots


def swap_test_states(
    a: Statevector, b: Statevector, shots: int, rng: np.random.Generator
) -> float:
    """Swap-test estimate from two prepared states.

    The ancilla of the controlled-swap circuit reads 0 with probability
    ``(1 + F)/2``; that distribution is computed analytically and sampled,
    which has the same statistics as simulating the 2d+1 qubit circuit.
    """
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    fidelity = min(float(abs(inner_product(a, b)) ** 2), 1.0)
    p_zero = 0.5 * (1.0 + fidelity)
    freq_zero = int(rng.binomial(shots, p_zero)) / shots
    return 2.0 * freq_zero - 1.0


def swap_test(
    x: np.ndarray,
    x_other: np.ndarray,
    fm: FeatureMapConfig,
    shots: int,
    rng: np.random.Generator,
) -> float:
    """Swap-test fidelity estimate for two data points."""
    if np.array_equal(np.asarray(x, float), np.asarray(x_other, float)):
        if shots < 1:
            raise ValueError(f"shots must be >= 1, got {shots}")
        return 1.0
    return swap_test_states(encode_iqp(x, fm), encode_iqp(x_other, fm), shots, rng)


# ---------------------------------------------------------------------------
# randomized measurements
# ---------------------------------------------------------------------------


def collect_signature(
    x: np.ndarray,
    fm: FeatureMapConfig,
    settings: list[LocalHaarSetting] | tuple[LocalHaarSetting, ...],
    shots: int,
    rng: np.random.Generator,
) -> RMSignature:
    """Measure the feature-map state of ``x`` in every given basis setting.

    The same settings list must be shared by all points entering one kernel
    matrix; the caller owns that contract.
    """
    if not settings:
        raise ValueError("at least one measurement setting is required")
    d = fm.num_qubits
    if any(st.num_qubits != d for st in settings):
        raise ValueError("all settings must act on the same number of qubits as the feature map")
    state = encode_iqp(x, fm)
    counts = np.empty((len(settings), 2**d), dtype=np.int64)
    for m, st in enumerate(settings):
        counts[m] = born_counts(apply_local(state, st), shots, rng)
    return RMSignature(num_qubits=d, counts=counts, shots_per_setting=shots)


def hamming(s: str, s_other: str) -> int:
    """Number of positions where two equal-length bitstrings differ."""
    if len(s) != len(s_other):
        raise ValueError(f"length mismatch: {len(s)} vs {len(s_other)}")
    return sum(c1 != c2 for c1, c2 in zip(s, s_other))


@lru_cache(maxsize=8)
def _coefficient_matrix(num_qubits: int) -> np.ndarray:
    """Cached table C[s, s'] = (-2)**(-H(s, s')) over all basis-state pairs."""
    dim = 2**num_qubits
    popcount = np.array([bin(v).count("1") for v in range(dim)], dtype=np.int64)
    idx = np.arange(dim)
    coeff = (-0.5) ** popcount[idx[:, None] ^ idx[None, :]]
    coeff.setflags(write=False)
    return coeff


def _check_signature_pair(sig_i: RMSignature, sig_j: RMSignature) -> None:
    if sig_i.num_qubits != sig_j.num_qubits:
        raise ValueError(
            f"qubit mismatch: {sig_i.num_qubits} vs {sig_j.num_qubits}"
        )
    if sig_i.num_settings != sig_j.num_settings:
        raise ValueError(
            f"setting-count mismatch: {sig_i.num_settings} vs {sig_j.num_settings}"
        )


def rm_kernel_entry(sig_i: RMSignature, sig_j: RMSignature) -> float:
    """Cross-correlation kernel estimate from two measurement records.

    Averages ``2^d * sum_{s,s'} (-2)^(-H(s,s')) P_i(s) P_j(s')`` over the
    shared settings.  The quadratic form is evaluated in both argument orders
    and averaged, which makes the result bit-exactly symmetric.
    """
    _check_signature_pair(sig_i, sig_j)
    coeff = _coefficient_matrix(sig_i.num_qubits)
    p_i = sig_i.frequencies
    p_j = sig_j.frequencies
    forward = np.einsum("mi,ij,mj->m", p_i, coeff, p_j)
    backward = np.einsum("mi,ij,mj->m", p_j, coeff, p_i)
    per_setting = 0.5 * (forward + backward)
    return float(2**sig_i.num_qubits * per_setting.mean())


def rm_purity(sig: RMSignature) -> float:
    """Bias-corrected purity estimate of one measurement record.

    Uses the U-statistic over distinct shot pairs within each setting,
    ``sum_{s,s'} (-2)^(-H) (c_s c_s' - delta_{ss'} c_s) / (shots (shots-1))``,
    which removes the O(1/shots) self-pair bias of the plug-in estimator.
    """
    shots = sig.shots_per_setting
    if shots < 2:
        raise ValueError("purity estimation needs at least 2 shots per setting")
    coeff = _coefficient_matrix(sig.num_qubits)
    c = sig.counts.astype(float)
    quad = np.einsum("mi,ij,mj->m", c, coeff, c)
    # the delta term only touches the coefficient diagonal, which is all ones
    per_setting = (quad - c.sum(axis=1)) / (shots * (shots - 1.0))
    return float(2**sig.num_qubits * per_setting.mean())


def mitigate(k_ij: float, p_i: float, p_j: float) -> float:
    """Purity-normalized kernel entry ``k_ij / sqrt(p_i * p_j)``."""
    if p_i <= 0 or p_j <= 0:
        raise DegenerateSignatureError(
            f"nonpositive purity estimate (p_i={p_i!r}, p_j={p_j!r}); "
            "signature is unusable for mitigation"
        )
    return k_ij / math.sqrt(p_i * p_j)


# ---------------------------------------------------------------------------
# classical baseline
# ---------------------------------------------------------------------------


def rbf_entry(x: np.ndarray, x_other: np.ndarray, gamma: float) -> float:
    """Gaussian kernel ``exp(-gamma * ||x - x'||^2)``."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma!r}")
    diff = np.asarray(x, float) - np.asarray(x_other, float)
    return float(np.exp(-gamma * np.dot(diff, diff)))


def rbf_auto_gamma(X_train: np.ndarray) -> float:
    """Data-driven bandwidth ``1 / (d * Var(X_train))`` over all entries."""
    X_train = np.asarray(X_train, dtype=float)
    var = float(X_train.var())
    d = X_train.shape[1]
    if var <= 0:
        return 1.0 / d
    return 1.0 / (d * var)


# ---------------------------------------------------------------------------
# Gram assembly
# ---------------------------------------------------------------------------


def _feature_states(X: np.ndarray, fm: FeatureMapConfig) -> np.ndarray:
    return np.stack([encode_iqp(x, fm).amplitudes for x in np.asarray(X, float)])


def _exact_fidelity_matrix(states_a: np.ndarray, states_b: np.ndarray) -> np.ndarray:
    return np.abs(states_a.conj() @ states_b.T) ** 2


def _mirror_upper(upper: np.ndarray, diagonal: np.ndarray) -> np.ndarray:
    """Symmetric matrix from a strict upper triangle and a diagonal."""
    strict = np.triu(upper, 1)
    return strict + strict.T + np.diag(diagonal)


def _rm_raw_matrix(freqs_a: np.ndarray, freqs_b: np.ndarray, num_qubits: int) -> np.ndarray:
    """All-pairs raw randomized-measurement estimates, averaged over settings."""
    coeff = _coefficient_matrix(num_qubits)
    r = freqs_a.shape[1]
    acc = np.zeros((freqs_a.shape[0], freqs_b.shape[0]))
    for m in range(r):
        acc += (freqs_a[:, m, :] @ coeff) @ freqs_b[:, m, :].T
    return 2**num_qubits * acc / r


def _collect_all_signatures(
    X: np.ndarray,
    fm: FeatureMapConfig,
    settings: tuple[LocalHaarSetting, ...],
    shots: int,
    rng: np.random.Generator,
) -> tuple[RMSignature, ...]:
    # one child stream per point, derived serially, so per-point collection
    # could run concurrently without changing any outcome
    seeds = rng.integers(0, 2**63 - 1, size=len(X))
    return tuple(
        collect_signature(x, fm, settings, shots, np.random.default_rng(int(seed)))
        for x, seed in zip(np.asarray(X, float), seeds)
    )


def build_gram_train(
    X: np.ndarray,
    cfg: KernelConfig,
    rng: np.random.Generator,
) -> tuple[GramMatrix, SignatureCache | None]:
    """Symmetric training kernel matrix for the configured strategy.

    Returns the Gram matrix together with the signature cache when the
    randomized strategy is used (``None`` otherwise); the cache must be handed
    back to :func:`build_gram_cross` at prediction time.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError(f"expected an (n, d) matrix with n >= 2, got shape {X.shape}")
    n = X.shape[0]
    cache: SignatureCache | None = None

    if cfg.kind == "rbf":
        gamma = rbf_auto_gamma(X) if cfg.rbf_gamma == "auto" else float(cfg.rbf_gamma)
        sq = _pairwise_sq_dists(X, X)
        upper = np.exp(-gamma * sq)
        entries = _mirror_upper(upper, np.ones(n))
        evals = 0
    elif cfg.kind in ("exact", "inversion_test", "swap_test"):
        states = _feature_states(X, cfg.feature_map)
        fid = np.clip(_exact_fidelity_matrix(states, states), 0.0, 1.0)
        iu, ju = np.triu_indices(n, k=1)
        pair_fid = fid[iu, ju]
        if cfg.kind == "exact":
            vals = pair_fid
        elif cfg.kind == "inversion_test":
            vals = rng.binomial(cfg.it_shots, pair_fid) / cfg.it_shots
        else:
            freq_zero = rng.binomial(cfg.it_shots, 0.5 * (1.0 + pair_fid)) / cfg.it_shots
            vals = 2.0 * freq_zero - 1.0
        upper = np.zeros((n, n))
        upper[iu, ju] = vals
        entries = _mirror_upper(upper, np.ones(n))
        evals = n * (n - 1) // 2
    else:  # randomized
        fm = cfg.feature_map
        settings = tuple(sample_haar_setting(fm.num_qubits, rng) for _ in range(cfg.rm_settings))
        signatures = _collect_all_signatures(X, fm, settings, cfg.rm_shots, rng)
        purities = np.array([rm_purity(sig) for sig in signatures])
        freqs = np.stack([sig.frequencies for sig in signatures])
        raw = _rm_raw_matrix(freqs, freqs, fm.num_qubits)
        if cfg.mitigate:
            if np.any(purities <= 0):
                bad = int(np.argmax(purities <= 0))
                raise DegenerateSignatureError(
                    f"point {bad} has nonpositive purity estimate {purities[bad]!r}"
                )
            scaled = raw / np.sqrt(np.outer(purities, purities))
            entries = _mirror_upper(scaled, np.ones(n))
        else:
            entries = _mirror_upper(raw, purities)
        evals = n * cfg.rm_settings
        cache = SignatureCache(settings=settings, signatures=signatures, purities=purities)

    gram = GramMatrix(entries=entries, symmetric=True, eval_count=evals)
    if cfg.clip_psd:
        gram = clip_gram_psd(gram)
    return gram, cache


def build_gram_cross(
    X_test: np.ndarray,
    X_train: np.ndarray,
    cfg: KernelConfig,
    rng: np.random.Generator | None = None,
    cache: SignatureCache | None = None,
) -> GramMatrix:
    """Prediction kernel matrix of shape (len(X_test), len(X_train)).

    Shot-based strategies need ``rng``.  The randomized strategy additionally
    needs the training-time :class:`SignatureCache`; only the test points are
    measured again (in the cached settings).
    """
    X_test = np.asarray(X_test, dtype=float)
    X_train = np.asarray(X_train, dtype=float)
    if X_test.ndim != 2 or X_train.ndim != 2 or X_test.shape[1] != X_train.shape[1]:
        raise ValueError(
            f"incompatible shapes: test {X_test.shape} vs train {X_train.shape}"
        )
    t, n = X_test.shape[0], X_train.shape[0]

    if cfg.kind == "rbf":
        gamma = rbf_auto_gamma(X_train) if cfg.rbf_gamma == "auto" else float(cfg.rbf_gamma)
        entries = np.exp(-gamma * _pairwise_sq_dists(X_test, X_train))
        evals = 0
    elif cfg.kind in ("exact", "inversion_test", "swap_test"):
        states_t = _feature_states(X_test, cfg.feature_map)
        states_n = _feature_states(X_train, cfg.feature_map)
        fid = np.clip(_exact_fidelity_matrix(states_t, states_n), 0.0, 1.0)
        if cfg.kind == "exact":
            entries = fid
        else:
            if rng is None:
                raise ValueError(f"kernel kind {cfg.kind!r} needs an rng for shot sampling")
            if cfg.kind == "inversion_test":
                entries = rng.binomial(cfg.it_shots, fid) / cfg.it_shots
            else:
                freq_zero = rng.binomial(cfg.it_shots, 0.5 * (1.0 + fid)) / cfg.it_shots
                entries = 2.0 * freq_zero - 1.0
        evals = t * n
    else:  # randomized
        if cache is None:
            raise ValueError("randomized cross kernel requires the training signature cache")
        if rng is None:
            raise ValueError("randomized cross kernel needs an rng for shot sampling")
        fm = cfg.feature_map
        if cache.num_qubits != fm.num_qubits:
            raise ValueError(
                f"cache encodes {cache.num_qubits} qubits, config expects {fm.num_qubits}"
            )
        if cache.num_settings != cfg.rm_settings:
            raise ValueError(
                f"cache holds {cache.num_settings} settings, config expects {cfg.rm_settings}"
            )
        test_sigs = _collect_all_signatures(X_test, fm, cache.settings, cfg.rm_shots, rng)
        freqs_t = np.stack([sig.frequencies for sig in test_sigs])
        freqs_n = np.stack([sig.frequencies for sig in cache.signatures])
        entries = _rm_raw_matrix(freqs_t, freqs_n, fm.num_qubits)
        if cfg.mitigate:
            purities_t = np.array([rm_purity(sig) for sig in test_sigs])
            if np.any(purities_t <= 0) or np.any(cache.purities <= 0):
                raise DegenerateSignatureError("nonpositive purity estimate in cross kernel")
            entries = entries / np.sqrt(np.outer(purities_t, cache.purities))
        evals = t * cfg.rm_settings

    return GramMatrix(entries=entries, symmetric=False, eval_count=evals)


def _pairwise_sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    diff = A[:, None, :] - B[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def clip_gram_psd(gram: GramMatrix) -> GramMatrix:
    """Project a symmetric Gram onto the PSD cone by zeroing negative eigenvalues.

    This is an explicit repair step, never applied implicitly; the amount of
    clipping is logged.
    """
    if not gram.symmetric:
        raise ValueError("PSD clipping is only defined for symmetric Grams")
    eigvals, eigvecs = np.linalg.eigh(gram.entries)
    clipped = np.clip(eigvals, 0.0, None)
    if np.array_equal(clipped, eigvals):
        return gram
    logger.info(
        "clipping %d negative eigenvalue(s); most negative was %.3e",
        int(np.sum(eigvals < 0)),
        float(eigvals.min()),
    )
    rebuilt = (eigvecs * clipped) @ eigvecs.T
    rebuilt = 0.5 * (rebuilt + rebuilt.T)
    return GramMatrix(entries=rebuilt, symmetric=True, eval_count=gram.eval_count)


# ---------------------------------------------------------------------------
# signature cache persistence
# ---------------------------------------------------------------------------


def save_signature_cache(path: str | Path, cache: SignatureCache) -> None:
    """Write a signature cache to an ``.npz`` file with a versioned header."""
    settings = np.stack([st.matrices for st in cache.settings])
    counts = np.stack([sig.counts for sig in cache.signatures])
    np.savez(
        path,
        format_version=np.int64(_SIGNATURE_CACHE_VERSION),
        num_qubits=np.int64(cache.num_qubits),
        shots_per_setting=np.int64(cache.shots_per_setting),
        settings=settings,
        counts=counts,
        purities=cache.purities,
    )


def load_signature_cache(path: str | Path) -> SignatureCache:
    """Read a signature cache written by :func:`save_signature_cache`."""
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != _SIGNATURE_CACHE_VERSION:
            raise ValueError(
                f"unsupported signature cache version {version}, "
                f"expected {_SIGNATURE_CACHE_VERSION}"
            )
        num_qubits = int(data["num_qubits"])
        shots = int(data["shots_per_setting"])
        settings = tuple(LocalHaarSetting(m) for m in data["settings"])
        signatures = tuple(
            RMSignature(num_qubits=num_qubits, counts=c, shots_per_setting=shots)
            for c in data["counts"]
        )
        purities = np.array(data["purities"])
    return SignatureCache(settings=settings, signatures=signatures, purities=purities)
