"""Leave-one-out cross-validation, accuracy and confusion reporting.

Methods
-------
``dtw``                 FERASEC features + warping-distance 1-NN.
``hmm``                 FERASEC features + the hybrid MLP-HMM classifier.
``hmm-raw``             raw frames fed straight to the MLP-HMM (one
                        N-dimensional vector per slow-time index).
``hmm-clutterreduced``  the same with clutter-reduced frames.

Faithful LOOCV retrains per held-out item; ``fast=True`` trains once per
class-balanced split (holding out whole repetition sessions), which
keeps the no-leakage guarantee at a fraction of the cost.  Per-fold
seeds derive from the master seed plus the held-out items' identities,
so results are invariant to manifest ordering.

Serialized reports carry no timestamps or timings: identical seeds must
reproduce identical bytes.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .clutter import DEFAULT_ALPHA, reduce_frameset
from .dtw import DtwConfig, mddtw_distance
from .errors import DomainError, TrainingError
from .features import FerasecConfig, extract_features
from .frames import CorpusManifest, ManifestEntry, load_frameset
from .hmm import HmmTrainingConfig, TrainedHmmModel, classify, train
from .seeding import derive_seed

__all__ = [
    "METHODS",
    "FoldRecord",
    "EvaluationReport",
    "accuracy",
    "loocv",
    "baseline_rawframe_eval",
    "format_report",
    "report_to_text",
    "write_report",
]

METHODS = ("dtw", "hmm", "hmm-raw", "hmm-clutterreduced")
_METHOD_ALIASES = {"hmm-cr": "hmm-clutterreduced"}
THREADS_ENV_VAR = "FERASEC_THREADS"


@dataclass(frozen=True)
class FoldRecord:
    item_id: str
    truth: str
    predicted: str


@dataclass(frozen=True)
class EvaluationReport:
    """Aggregate of one cross-validation run."""

    method: str
    labels: tuple[str, ...]
    confusion: np.ndarray  # (B, B) counts; rows = truth, columns = prediction
    folds: tuple[FoldRecord, ...]
    reps_per_class: int
    timing_s: float = 0.0  # informational only; never serialized

    def __post_init__(self) -> None:
        labels = tuple(self.labels)
        confusion = np.asarray(self.confusion, dtype=np.int64).copy()
        folds = tuple(self.folds)
        b = len(labels)
        if confusion.shape != (b, b):
            raise DomainError(f"confusion matrix must be {b}x{b}, got {confusion.shape}")
        if int(confusion.sum()) != len(folds):
            raise DomainError("confusion total must equal the number of folds")
        confusion.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "confusion", confusion)
        object.__setattr__(self, "folds", folds)

    @property
    def item_count(self) -> int:
        return len(self.folds)

    @property
    def correct_count(self) -> int:
        return int(np.trace(self.confusion))

    @property
    def accuracy_percent(self) -> float:
        return 100.0 * self.correct_count / self.item_count

    @property
    def row_percentages(self) -> np.ndarray:
        """Row-relative percentages; rows with no items stay zero."""
        totals = self.confusion.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            pct = np.where(totals > 0, 100.0 * self.confusion / totals, 0.0)
        return pct


def accuracy(correct: int, reps: int, class_count: int) -> float:
    """Percentage of correctly classified items: ``100 * x / (reps * B)``."""
    if reps < 1 or class_count < 1:
        raise DomainError("reps and class_count must be positive")
    total = reps * class_count
    if not 0 <= correct <= total:
        raise DomainError(f"correct count {correct} outside 0..{total}")
    return 100.0 * correct / total


def _max_workers() -> int:
    raw = os.environ.get(THREADS_ENV_VAR, "1")
    try:
        workers = int(raw)
    except ValueError:
        raise DomainError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from None
    return max(1, workers)


def _map_folds(fn: Callable, jobs: Sequence) -> list:
    """Run independent fold jobs, optionally across a thread pool.

    Results are collected by index, so the outcome is identical whatever
    the scheduling.
    """
    workers = min(_max_workers(), len(jobs)) if jobs else 1
    if workers <= 1:
        return [fn(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _canonical_order(entries: Sequence[ManifestEntry]) -> list[int]:
    return sorted(range(len(entries)), key=lambda i: (entries[i].label, entries[i].repetition, entries[i].position))


def _item_features(
    manifest: CorpusManifest,
    method: str,
    ferasec_cfg: FerasecConfig,
    alpha: float,
) -> list[np.ndarray]:
    """Per-item classifier inputs, in manifest order."""
    out: list[np.ndarray] = []
    for entry in manifest.entries:
        fs = load_frameset(manifest.resolve(entry), label=entry.label)
        if method in ("dtw", "hmm"):
            out.append(extract_features(fs, ferasec_cfg, alpha).values)
        elif method == "hmm-raw":
            out.append(fs.data.T.astype(np.float64))
        else:  # hmm-clutterreduced
            out.append(reduce_frameset(fs, alpha).data.T.astype(np.float64))
    return out


def _dtw_folds(
    manifest: CorpusManifest, features: list[np.ndarray], dtw_cfg: DtwConfig
) -> list[FoldRecord]:
    entries = manifest.entries
    a = len(entries)
    distances = np.zeros((a, a))
    for i in range(a):
        for j in range(i + 1, a):
            distances[i, j] = distances[j, i] = mddtw_distance(features[i], features[j], dtw_cfg)
    records = []
    for i, entry in enumerate(entries):
        row = distances[i].copy()
        row[i] = np.inf  # the held-out item is never its own reference
        nearest = int(np.argmin(row))  # first minimum = earliest manifest order
        assert nearest != i
        records.append(FoldRecord(entry.item_id, entry.label, entries[nearest].label))
    return records


def _train_and_classify(
    train_items: list[tuple[np.ndarray, str]],
    test_items: list[tuple[ManifestEntry, np.ndarray]],
    held_out_ids: set[str],
    train_ids: list[str],
    hmm_cfg: HmmTrainingConfig,
) -> list[FoldRecord]:
    leaked = held_out_ids.intersection(train_ids)
    if leaked:
        raise AssertionError(f"held-out items leaked into training: {sorted(leaked)}")
    model: TrainedHmmModel = train(train_items, hmm_cfg)
    records = []
    for entry, feats in test_items:
        predicted, _ = classify(model, feats)
        records.append(FoldRecord(entry.item_id, entry.label, predicted))
    return records


def _hmm_folds_faithful(
    manifest: CorpusManifest,
    features: list[np.ndarray],
    hmm_cfg: HmmTrainingConfig,
    seed: int,
) -> list[FoldRecord]:
    entries = manifest.entries
    # Training corpora are assembled in canonical item order and fold seeds
    # key on item identity, so results survive manifest permutation.
    canonical = _canonical_order(entries)

    def run(fold_index: int) -> list[FoldRecord]:
        entry = entries[fold_index]
        fold_seed = derive_seed(seed, "fold", entry.label, entry.repetition, entry.position)
        train_items = [
            (features[j], entries[j].label) for j in canonical if j != fold_index
        ]
        train_ids = [entries[j].item_id for j in canonical if j != fold_index]
        cfg = _with_seed(hmm_cfg, fold_seed)
        return _train_and_classify(
            train_items, [(entry, features[fold_index])], {entry.item_id}, train_ids, cfg
        )

    nested = _map_folds(run, canonical)
    return [rec for recs in nested for rec in recs]


def _hmm_folds_fast(
    manifest: CorpusManifest,
    features: list[np.ndarray],
    hmm_cfg: HmmTrainingConfig,
    seed: int,
    groups: int | None,
) -> list[FoldRecord]:
    entries = manifest.entries
    canonical = _canonical_order(entries)
    reps = sorted({e.repetition for e in entries})
    group_count = len(reps) if groups is None else groups
    if not 1 < group_count <= len(reps):
        raise DomainError(
            f"fast LOOCV needs between 2 and {len(reps)} splits, got {group_count}"
        )
    bounds = np.linspace(0, len(reps), group_count + 1).round().astype(int)
    rep_groups = [tuple(reps[lo:hi]) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]

    def run(group: tuple[int, ...]) -> list[FoldRecord]:
        group_seed = derive_seed(seed, "group", *[str(r) for r in group])
        held = set(group)
        train_items = [
            (features[j], entries[j].label)
            for j in canonical
            if entries[j].repetition not in held
        ]
        train_ids = [entries[j].item_id for j in canonical if entries[j].repetition not in held]
        test_items = [
            (entries[j], features[j])
            for j in canonical
            if entries[j].repetition in held
        ]
        held_ids = {entry.item_id for entry, _ in test_items}
        cfg = _with_seed(hmm_cfg, group_seed)
        return _train_and_classify(train_items, test_items, held_ids, train_ids, cfg)

    nested = _map_folds(run, rep_groups)
    return [rec for recs in nested for rec in recs]


def _with_seed(cfg: HmmTrainingConfig, seed: int) -> HmmTrainingConfig:
    return replace(cfg, seed=seed)


def loocv(
    manifest: CorpusManifest,
    method: str = "dtw",
    *,
    seed: int = 0,
    ferasec_cfg: FerasecConfig = FerasecConfig(),
    alpha: float = DEFAULT_ALPHA,
    dtw_cfg: DtwConfig = DtwConfig(),
    hmm_cfg: HmmTrainingConfig = HmmTrainingConfig(),
    fast: bool = False,
    fast_groups: int | None = None,
) -> EvaluationReport:
    """Cross-validate a classification method over a labeled corpus.

    Every item is classified by references/models built strictly from the
    other items; an in-fold audit asserts that the held-out items appear
    in no training set.  Deterministic given ``seed``.
    """
    method = _METHOD_ALIASES.get(method, method)
    if method not in METHODS:
        raise DomainError(f"method must be one of {METHODS}, got {method!r}")
    a = len(manifest.entries)
    b = manifest.class_count
    if a < 2 * b:
        raise DomainError(f"need at least two items per class, got {a} items for {b} classes")
    reps_per_class = manifest.reps_per_class

    started = time.perf_counter()
    features = _item_features(manifest, method, ferasec_cfg, alpha)
    if method == "dtw":
        records = _dtw_folds(manifest, features, dtw_cfg)
    else:
        try:
            if fast:
                records = _hmm_folds_fast(manifest, features, hmm_cfg, seed, fast_groups)
            else:
                records = _hmm_folds_faithful(manifest, features, hmm_cfg, seed)
        except TrainingError as exc:
            raise TrainingError(f"{method} cross-validation aborted: {exc}") from exc

    labels = tuple(sorted(manifest.labels))
    index = {label: i for i, label in enumerate(labels)}
    by_id = {rec.item_id: rec for rec in records}
    ordered = tuple(by_id[e.item_id] for e in manifest.entries)
    confusion = np.zeros((b, b), dtype=np.int64)
    for rec in ordered:
        confusion[index[rec.truth], index[rec.predicted]] += 1
    return EvaluationReport(
        method=method,
        labels=labels,
        confusion=confusion,
        folds=ordered,
        reps_per_class=reps_per_class,
        timing_s=time.perf_counter() - started,
    )


def baseline_rawframe_eval(
    manifest: CorpusManifest,
    variant: str = "raw",
    **kwargs,
) -> EvaluationReport:
    """MLP-HMM evaluation on frame-level inputs instead of FERASEC features.

    ``variant`` selects raw or clutter-reduced frames.  Used to check
    that engineered features beat frame-level inputs under the same
    protocol.
    """
    methods = {"raw": "hmm-raw", "clutter_reduced": "hmm-clutterreduced"}
    if variant not in methods:
        raise DomainError(f"variant must be one of {tuple(methods)}, got {variant!r}")
    return loocv(manifest, methods[variant], **kwargs)


def format_report(report: EvaluationReport) -> str:
    """Human-readable table: accuracy plus the confusion matrix."""
    lines = [
        f"method: {report.method}",
        f"items: {report.item_count} ({len(report.labels)} classes x {report.reps_per_class} reps)",
        f"accuracy: {report.accuracy_percent:.2f}% ({report.correct_count}/{report.item_count})",
        "",
        "confusion (rows = truth; count and row-relative %):",
    ]
    label_w = max(len(label) for label in report.labels)
    cell_w = max(12, label_w + 2)
    header = " " * (label_w + 2) + "".join(f"{label:>{cell_w}}" for label in report.labels)
    lines.append(header)
    pct = report.row_percentages
    for i, label in enumerate(report.labels):
        cells = "".join(
            f"{f'{report.confusion[i, j]} ({pct[i, j]:.1f}%)':>{cell_w}}"
            for j in range(len(report.labels))
        )
        lines.append(f"{label:<{label_w}}  {cells}")
    return "\n".join(lines) + "\n"


def report_to_text(report: EvaluationReport) -> str:
    """Machine-readable key=value serialization; byte-stable across reruns."""
    for label in report.labels:
        if "," in label or "=" in label or "\n" in label:
            raise DomainError(f"label {label!r} cannot be serialized in key=value form")
    lines = [
        f"method={report.method}",
        f"classes={len(report.labels)}",
        f"items={report.item_count}",
        f"reps_per_class={report.reps_per_class}",
        f"correct={report.correct_count}",
        f"accuracy_percent={report.accuracy_percent:.6f}",
        "labels=" + ",".join(report.labels),
    ]
    for i, label in enumerate(report.labels):
        lines.append(f"confusion.{label}=" + ",".join(str(c) for c in report.confusion[i]))
    for rec in report.folds:
        lines.append(f"fold.{rec.item_id}={rec.truth},{rec.predicted}")
    return "\n".join(lines) + "\n"


def write_report(report: EvaluationReport, path: str | Path) -> None:
    Path(path).write_text(report_to_text(report), encoding="utf-8")
