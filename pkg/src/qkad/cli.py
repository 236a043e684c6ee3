"""Benchmark harness: configured experiment runs, JSON-lines records, CSV summaries.

A run sweeps a list of seeds; each seed gets its own data split, its own
random streams, and produces one record.  Records carry everything needed to
reproduce the run (config echo, package version, generator constants) plus
metrics, phase timings and kernel-evaluation counts.  A failing seed yields a
record with the error message while the remaining seeds still run; the
process exit code is zero only when every seed succeeded.

Seeds run sequentially by default; ``--parallel`` fans them out over threads
without changing any numeric output, because every seed owns its streams.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, data, ocsvm, pipeline
from .ensemble import VSConfig, cross_eval_count, fit_vs, rotation_dim, score_vs
from .kernel import KernelConfig, build_gram_cross, build_gram_train
from .metrics import MetricsReport, average_precision, confusion, f1, precision_recall
from .ocsvm import SolverConfig
from .statevec import FeatureMapConfig

__all__ = ["RunConfig", "RunRecord", "run_experiment", "summarize", "records_to_jsonl", "main"]

logger = logging.getLogger(__name__)

METHODS = ("rbf", "it", "rm", "rm-unmitigated", "vs-it", "vs-rm", "vs-rfb-rm")
DATASETS = ("synthetic", "fraud")
FRAUD_CSV_ENV = "QKAD_FRAUD_CSV"

# kernel kind, default mitigation, ensemble?, feature bagging?
_METHOD_TABLE = {
    "rbf": ("rbf", False, False, False),
    "it": ("inversion_test", False, False, False),
    "rm": ("randomized", True, False, False),
    "rm-unmitigated": ("randomized", False, False, False),
    "vs-it": ("inversion_test", False, True, False),
    "vs-rm": ("randomized", False, True, False),
    "vs-rfb-rm": ("randomized", False, True, True),
}

_ANOMALY_RATIO = {"synthetic": 0.3, "fraud": 0.05}
_DEFAULT_FEATURES = {"synthetic": 2, "fraud": 6}


@dataclass(frozen=True)
class RunConfig:
    method: str
    dataset: str
    train_size: int = 500
    num_features: int | None = None  # None -> 2 (synthetic) / 6 (fraud)
    nu: float = 0.1
    angle_scale: float = 3.0
    layers: int = 2
    it_shots: int = 1000
    rm_settings: int = 30
    rm_shots: int = 9000
    aggregation: str = "mean"
    seeds: tuple[int, ...] = tuple(range(15))
    fraud_csv: str | None = None
    output: str | None = None
    threshold: float = 0.0
    mitigate: bool | None = None  # None -> method default
    record_timings: bool = True
    parallel: bool = False

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.dataset not in DATASETS:
            raise ValueError(f"unknown dataset {self.dataset!r}, expected one of {DATASETS}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.num_features is not None and self.num_features < 1:
            raise ValueError("num_features must be >= 1")
        if self.method == "vs-rfb-rm" and self.resolved_features() < 2:
            raise ValueError("rotated feature bagging needs at least 2 post-PCA features")

    def resolved_features(self) -> int:
        return self.num_features if self.num_features is not None else _DEFAULT_FEATURES[self.dataset]

    def resolved_mitigate(self) -> bool:
        if self.mitigate is not None:
            return self.mitigate
        return _METHOD_TABLE[self.method][1]


@dataclass(frozen=True)
class RunRecord:
    method: str
    dataset: str
    seed: int
    n_train: int
    d: int
    ap: float | None = None
    f1: float | None = None
    precision: float | None = None
    recall: float | None = None
    train_time_s: float | None = None
    test_time_s: float | None = None
    kernel_evals: int | None = None
    components: int | None = None
    r_prime: int | None = None
    tp: int | None = None
    fp: int | None = None
    tn: int | None = None
    fn: int | None = None
    gram_time_s: float | None = None
    solver_time_s: float | None = None
    train_kernel_evals: int | None = None
    test_kernel_evals: int | None = None
    converged: bool | None = None
    error: str | None = None
    config: dict = field(default_factory=dict)
    version: str = __version__
    synthetic_generator: dict | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _config_echo(cfg: RunConfig) -> dict:
    return {
        "method": cfg.method,
        "dataset": cfg.dataset,
        "train_size": cfg.train_size,
        "num_features": cfg.resolved_features(),
        "nu": cfg.nu,
        "lambda": cfg.angle_scale,
        "layers": cfg.layers,
        "it_shots": cfg.it_shots,
        "rm_settings": cfg.rm_settings,
        "rm_shots": cfg.rm_shots,
        "aggregation": cfg.aggregation,
        "mitigate": cfg.resolved_mitigate(),
        "threshold": cfg.threshold,
        "fraud_csv": cfg.fraud_csv,
        "preprocessing": "standard_scaler+pca+kind_rescale",
        "score_normalization": "train-zscore",
    }


def _synthetic_constants() -> dict:
    return {
        "cluster_centers": [list(c) for c in data.SYNTHETIC_CLUSTER_CENTERS],
        "cluster_std": float(data.SYNTHETIC_CLUSTER_STD),
        "anomaly_box": list(data.SYNTHETIC_ANOMALY_BOX),
    }


def _load_fraud(cfg: RunConfig) -> data.Dataset:
    path = cfg.fraud_csv or os.environ.get(FRAUD_CSV_ENV)
    if not path:
        raise ValueError(
            f"fraud dataset needs a CSV path (--fraud-csv or ${FRAUD_CSV_ENV})"
        )
    return data.load_fraud_csv(path)


def _make_datasets(
    cfg: RunConfig, seed: int, fraud: data.Dataset | None, rng: np.random.Generator
) -> tuple[data.Dataset, data.Dataset]:
    spec = data.SplitSpec(
        train_size=cfg.train_size,
        test_size=125,
        test_anomaly_ratio=_ANOMALY_RATIO[cfg.dataset],
        seed=seed,
    )
    if cfg.dataset == "synthetic":
        return data.generate_synthetic(cfg.train_size, spec, rng)
    assert fraud is not None
    return data.make_split(fraud, spec, rng)


def _run_seed(cfg: RunConfig, seed: int, fraud: data.Dataset | None) -> RunRecord:
    kind, _, is_ensemble, use_rfb = _METHOD_TABLE[cfg.method]
    mitigate = cfg.resolved_mitigate()
    m = cfg.resolved_features()

    data_rng, train_rng, solver_rng, score_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)
    )
    train, test = _make_datasets(cfg, seed, fraud, data_rng)
    if m > train.n_features:
        raise ValueError(f"num_features={m} exceeds source dimensionality {train.n_features}")

    prep = pipeline.fit_preprocess(train.features, kind, m)
    X_train = pipeline.apply_preprocess(prep, train.features)
    X_test = pipeline.apply_preprocess(prep, test.features)

    fm = None
    if kind != "rbf":
        fm = FeatureMapConfig(num_qubits=m, layers=cfg.layers, angle_scale=cfg.angle_scale)
    kcfg = KernelConfig(
        kind=kind,
        feature_map=fm,
        it_shots=cfg.it_shots,
        rm_settings=cfg.rm_settings,
        rm_shots=cfg.rm_shots,
        mitigate=mitigate,
    )

    r_prime = rotation_dim(m) if use_rfb else None
    if is_ensemble:
        vs_cfg = VSConfig(
            base_kernel=kcfg,
            nu=cfg.nu,
            aggregation=cfg.aggregation,
            rfb_enabled=use_rfb,
        )
        t0 = time.perf_counter()
        model = fit_vs(X_train, vs_cfg, train_rng)
        t1 = time.perf_counter()
        scores = score_vs(model, X_test)
        t2 = time.perf_counter()
        gram_time, solver_time = model.gram_time_s, model.solver_time_s
        train_time, test_time = t1 - t0, t2 - t1
        train_evals = model.train_eval_count
        test_evals = cross_eval_count(model, X_test.shape[0])
        n_components = len(model.components)
        converged = all(c.model.converged for c in model.components)
    else:
        t0 = time.perf_counter()
        gram, cache = build_gram_train(X_train, kcfg, train_rng)
        t1 = time.perf_counter()
        model = ocsvm.fit(gram, cfg.nu, SolverConfig(), solver_rng)
        t2 = time.perf_counter()
        cross = build_gram_cross(X_test, X_train, kcfg, score_rng, cache)
        scores = ocsvm.decision_scores(model, cross)
        t3 = time.perf_counter()
        gram_time, solver_time = t1 - t0, t2 - t1
        train_time, test_time = t2 - t0, t3 - t2
        train_evals = gram.eval_count
        test_evals = cross.eval_count
        n_components = 1
        converged = model.converged

    predictions = (scores < cfg.threshold).astype(np.int64)
    counts = confusion(test.labels, predictions)
    prec, rec = precision_recall(counts)

    if not cfg.record_timings:
        gram_time = solver_time = train_time = test_time = 0.0

    report = MetricsReport(
        precision=prec,
        recall=rec,
        f1=f1(prec, rec),
        average_precision=average_precision(-scores, test.labels),
        counts=counts,
        train_time_s=train_time,
        test_time_s=test_time,
        kernel_evals=train_evals + test_evals,
    )
    return RunRecord(
        method=cfg.method,
        dataset=cfg.dataset,
        seed=seed,
        n_train=cfg.train_size,
        d=m,
        ap=report.average_precision,
        f1=report.f1,
        precision=report.precision,
        recall=report.recall,
        train_time_s=report.train_time_s,
        test_time_s=report.test_time_s,
        kernel_evals=report.kernel_evals,
        components=n_components,
        r_prime=r_prime,
        tp=counts.tp,
        fp=counts.fp,
        tn=counts.tn,
        fn=counts.fn,
        gram_time_s=gram_time,
        solver_time_s=solver_time,
        train_kernel_evals=train_evals,
        test_kernel_evals=test_evals,
        converged=converged,
        config=_config_echo(cfg),
        synthetic_generator=_synthetic_constants() if cfg.dataset == "synthetic" else None,
    )


def run_experiment(cfg: RunConfig) -> list[RunRecord]:
    """Run every seed of the configured experiment; never aborts the sweep."""
    fraud: data.Dataset | None = None
    if cfg.dataset == "fraud":
        try:
            fraud = _load_fraud(cfg)
        except Exception as exc:
            logger.error("fraud dataset unavailable: %s", exc)
            message = f"{type(exc).__name__}: {exc}"
            return [
                RunRecord(
                    method=cfg.method,
                    dataset=cfg.dataset,
                    seed=seed,
                    n_train=cfg.train_size,
                    d=cfg.resolved_features(),
                    error=message,
                    config=_config_echo(cfg),
                )
                for seed in cfg.seeds
            ]

    def one(seed: int) -> RunRecord:
        try:
            record = _run_seed(cfg, seed, fraud)
            logger.info("seed %d: ap=%.4f f1=%.4f", seed, record.ap, record.f1)
            return record
        except Exception as exc:
            logger.error("seed %d failed: %s", seed, exc)
            return RunRecord(
                method=cfg.method,
                dataset=cfg.dataset,
                seed=seed,
                n_train=cfg.train_size,
                d=cfg.resolved_features(),
                error=f"{type(exc).__name__}: {exc}",
                config=_config_echo(cfg),
            )

    if cfg.parallel and len(cfg.seeds) > 1:
        with ThreadPoolExecutor(max_workers=min(len(cfg.seeds), os.cpu_count() or 1)) as pool:
            return list(pool.map(one, cfg.seeds))
    return [one(seed) for seed in cfg.seeds]


def records_to_jsonl(records: list[RunRecord]) -> str:
    return "".join(json.dumps(asdict(r)) + "\n" for r in records)


_RECORD_FIELDS = {f.name for f in fields(RunRecord)}


def load_records_jsonl(path: str | Path) -> list[RunRecord]:
    """Read records written by the harness (unknown keys are ignored)."""
    records = []
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: line {line_no} is not valid JSON: {exc}") from None
        records.append(RunRecord(**{k: v for k, v in payload.items() if k in _RECORD_FIELDS}))
    return records


SUMMARY_METRICS = ("ap", "f1", "precision", "recall", "train_time_s", "test_time_s")


def summarize(records: list[RunRecord]) -> list[dict]:
    """Per-(method, dataset, n_train, d) means and sample standard deviations."""
    ok = [r for r in records if r.ok]
    if not ok:
        raise ValueError("no successful records to summarize")
    groups: dict[tuple, list[RunRecord]] = {}
    for r in ok:
        groups.setdefault((r.method, r.dataset, r.n_train, r.d), []).append(r)

    rows = []
    for (method, dataset, n_train, d), members in sorted(groups.items()):
        row: dict = {
            "method": method,
            "dataset": dataset,
            "n_train": n_train,
            "d": d,
            "n_runs": len(members),
        }
        for metric in SUMMARY_METRICS:
            values = np.array([getattr(r, metric) for r in members], dtype=float)
            row[f"{metric}_mean"] = float(values.mean())
            row[f"{metric}_std"] = float(values.std(ddof=1)) if len(values) > 1 else 0.0
        rows.append(row)
    return rows


def summary_to_csv(rows: list[dict]) -> str:
    import csv as _csv
    import io

    buffer = io.StringIO()
    writer = _csv.DictWriter(buffer, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    writer.writerows(rows)
    return buffer.getvalue()


def _parse_seeds(text: str) -> tuple[int, ...]:
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:  # allow negative single values, not negative ranges
            lo, hi = part.split("-", 1) if not part.startswith("-") else (part, "")
            if hi == "":
                raise ValueError(f"bad seed range {part!r}")
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError(f"no seeds parsed from {text!r}")
    return tuple(seeds)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qkad",
        description="Quantum-kernel one-class SVM anomaly detection benchmark",
    )
    parser.add_argument("--method", choices=METHODS)
    parser.add_argument("--dataset", choices=DATASETS)
    parser.add_argument("--summarize-records", nargs="+", metavar="JSONL", default=None,
                        help="skip running; summarize existing record files into --summary")
    parser.add_argument("--train-size", type=int, default=500)
    parser.add_argument("--num-features", type=int, default=None)
    parser.add_argument("--nu", type=float, default=0.1)
    parser.add_argument("--lambda", dest="angle_scale", type=float, default=3.0,
                        help="feature-map angle scale (default 3)")
    parser.add_argument("--layers", type=int, default=2)
    parser.add_argument("--it-shots", type=int, default=1000)
    parser.add_argument("--rm-settings", type=int, default=30)
    parser.add_argument("--rm-shots", type=int, default=9000)
    parser.add_argument("--aggregation", choices=("mean", "max"), default="mean")
    parser.add_argument("--seeds", type=_parse_seeds, default=tuple(range(15)),
                        help="comma list and/or ranges, e.g. '0-14' or '0,3,7'")
    parser.add_argument("--fraud-csv", default=None,
                        help=f"path to the fraud CSV (or set ${FRAUD_CSV_ENV})")
    parser.add_argument("--output", default=None, help="JSON-lines records path (default stdout)")
    parser.add_argument("--summary", default=None, help="optional summary CSV path")
    parser.add_argument("--threshold", type=float, default=0.0,
                        help="label threshold on the aggregated score")
    parser.add_argument("--mitigate", action=argparse.BooleanOptionalAction, default=None,
                        help="force randomized-kernel mitigation on/off (default: per method)")
    parser.add_argument("--omit-timings", action="store_true",
                        help="write zero timings for byte-reproducible output")
    parser.add_argument("--parallel", action="store_true", help="run seeds on a thread pool")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.summarize_records:
        records: list[RunRecord] = []
        for path in args.summarize_records:
            records.extend(load_records_jsonl(path))
        rows = summarize(records)
        text = summary_to_csv(rows)
        if args.summary:
            Path(args.summary).write_text(text)
            logger.info("wrote summary of %d records to %s", len(records), args.summary)
        else:
            sys.stdout.write(text)
        return 0

    if args.method is None or args.dataset is None:
        parser.error("--method and --dataset are required unless --summarize-records is used")

    cfg = RunConfig(
        method=args.method,
        dataset=args.dataset,
        train_size=args.train_size,
        num_features=args.num_features,
        nu=args.nu,
        angle_scale=args.angle_scale,
        layers=args.layers,
        it_shots=args.it_shots,
        rm_settings=args.rm_settings,
        rm_shots=args.rm_shots,
        aggregation=args.aggregation,
        seeds=tuple(args.seeds),
        fraud_csv=args.fraud_csv,
        output=args.output,
        threshold=args.threshold,
        mitigate=args.mitigate,
        record_timings=not args.omit_timings,
        parallel=args.parallel,
    )
    records = run_experiment(cfg)

    jsonl = records_to_jsonl(records)
    if cfg.output:
        Path(cfg.output).write_text(jsonl)
        logger.info("wrote %d records to %s", len(records), cfg.output)
    else:
        sys.stdout.write(jsonl)

    if args.summary:
        rows = summarize(records)
        Path(args.summary).write_text(summary_to_csv(rows))
        logger.info("wrote summary to %s", args.summary)

    failed = [r.seed for r in records if not r.ok]
    if failed:
        logger.error("failed seeds: %s", failed)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
