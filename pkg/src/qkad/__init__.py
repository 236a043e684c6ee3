"""Quantum-kernel one-class SVM anomaly detection benchmark.

Statevector simulation of data-encoding circuits, four kernel estimation
strategies (exact overlap, inversion test, swap test, randomized
measurements with purity mitigation) plus a classical RBF baseline, a
nu-one-class-SVM dual solver for precomputed kernels, variable-subsampling
ensembles with optional rotated feature bagging, and a seeded benchmark
harness with JSON-lines output.
"""

__version__ = "0.1.0"

from .statevec import (  # noqa: F401
    FeatureMapConfig,
    LocalHaarSetting,
    OutcomeHistogram,
    Statevector,
    apply_local,
    encode_iqp,
    inner_product,
    measure,
    sample_haar_setting,
)
from .kernel import (  # noqa: F401
    DegenerateSignatureError,
    GramMatrix,
    KernelConfig,
    RMSignature,
    SignatureCache,
    build_gram_cross,
    build_gram_train,
    clip_gram_psd,
    collect_signature,
    exact_fidelity,
    hamming,
    inversion_test,
    load_signature_cache,
    mitigate,
    rbf_entry,
    rm_kernel_entry,
    rm_purity,
    save_signature_cache,
    swap_test,
)
from .ocsvm import OCSVMModel, SolverConfig, decision_scores, fit, predict  # noqa: F401
from .ensemble import (  # noqa: F401
    Component,
    EnsembleModel,
    VSConfig,
    fit_vs,
    random_rotation,
    rotation_dim,
    sample_sizes,
    score_vs,
)
from .pipeline import (  # noqa: F401
    PCAParams,
    PreprocessParams,
    ScalerParams,
    apply_pca,
    apply_preprocess,
    apply_scaler,
    fit_pca,
    fit_preprocess,
    fit_scaler,
    kernel_rescale,
)
from .data import Dataset, SplitSpec, generate_synthetic, load_fraud_csv, make_split  # noqa: F401
from .metrics import MetricsReport, average_precision, confusion, f1  # noqa: F401
from .cli import RunConfig, RunRecord, run_experiment, summarize  # noqa: F401
