"""Cross-validation protocol, metrics, and the experiment matrix."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import siamese
from .baselines import (
    DecisionTreeClassifier,
    KNNClassifier,
    LinearSVMClassifier,
    RandomForestClassifier,
    argmax_by_score,
)
from .corpus import FlakyTest
from .embed import Backend, EmbeddingStore, build_vocab, vocab_embed
from .errors import DataError, InternalError
from .fewshot import classify, select_support

log = logging.getLogger(__name__)

BASELINE_NAMES = ("knn", "dt", "rf", "svm")
CLASSIFIER_NAMES = ("fsl",) + BASELINE_NAMES

SVM_KERNEL_NOTE = "svm is linear (hinge subgradient), not kernelized"


# ---------------------------------------------------------------------------
# Fold assignment


def stratified_group_kfold(
    tests: Sequence[FlakyTest], k: int = 4, seed: int = 0
) -> dict[str, int]:
    """Assign lineage families to folds, stratified by category.

    A family is an original test plus all tests augmented from it; the whole
    family lands in one fold. Per category, families are shuffled and dealt
    round-robin from a seeded offset, so per-fold original counts differ by
    at most one.
    """
    if k < 2:
        raise DataError("k must be at least 2")
    originals = [t for t in tests if not t.is_augmented]
    by_id = {t.id: t for t in originals}
    by_category: dict[str, list[str]] = {}
    for test in sorted(originals, key=lambda t: t.id):
        by_category.setdefault(test.category.value, []).append(test.id)

    rng = np.random.default_rng(seed)
    assignment: dict[str, int] = {}
    for category in sorted(by_category):
        family_ids = list(by_category[category])
        if len(family_ids) < k:
            raise DataError(
                f"category {category!r} has {len(family_ids)} families, needs >= {k}"
            )
        rng.shuffle(family_ids)
        offset = int(rng.integers(k))
        for i, test_id in enumerate(family_ids):
            assignment[test_id] = (offset + i) % k

    for test in tests:
        if test.is_augmented:
            if test.augmented_from not in assignment:
                raise DataError(
                    f"augmented test {test.id!r} has origin outside the corpus"
                )
            assignment[test.id] = assignment[test.augmented_from]
    return assignment


# ---------------------------------------------------------------------------
# Metrics


@dataclass(frozen=True)
class ConfusionMatrix:
    labels: tuple[str, ...]
    matrix: np.ndarray  # matrix[i, j] = count(true=labels[i], predicted=labels[j])

    @classmethod
    def from_pairs(
        cls, labels: Sequence[str], pairs: Iterable[tuple[str, str]]
    ) -> "ConfusionMatrix":
        index = {c: i for i, c in enumerate(labels)}
        matrix = np.zeros((len(labels), len(labels)), dtype=np.int64)
        for true, predicted in pairs:
            if true not in index or predicted not in index:
                raise DataError(f"label outside matrix scope: {true!r}/{predicted!r}")
            matrix[index[true], index[predicted]] += 1
        return cls(labels=tuple(labels), matrix=matrix)

    @property
    def total(self) -> int:
        return int(self.matrix.sum())


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    f1: float
    mcc: float
    auc: float
    per_class: dict[str, dict[str, float]]
    notes: tuple[str, ...] = ()

    def summary(self) -> dict[str, float]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "mcc": self.mcc,
            "auc": self.auc,
        }


def _multiclass_mcc(matrix: np.ndarray) -> float:
    """R_k statistic over the confusion matrix; degenerate cases are 0.0."""
    m = matrix.astype(np.float64)
    s = m.sum()
    c = np.trace(m)
    t = m.sum(axis=1)  # per-class truth counts
    p = m.sum(axis=0)  # per-class prediction counts
    denom_t = s * s - np.sum(t * t)
    denom_p = s * s - np.sum(p * p)
    if denom_t <= 0.0 or denom_p <= 0.0:
        return 0.0
    return float((c * s - np.sum(p * t)) / np.sqrt(denom_p * denom_t))


def _rankdata(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) with ties sharing their mean rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _one_vs_rest_auc(is_positive: np.ndarray, scores: np.ndarray) -> float:
    """Mann-Whitney AUC from rank sums; tied scores count 0.5."""
    n_pos = int(is_positive.sum())
    n_neg = len(is_positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InternalError("AUC undefined without both positives and negatives")
    ranks = _rankdata(scores)
    rank_sum = float(ranks[is_positive].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def compute_metrics(
    confusion: ConfusionMatrix,
    scores: Sequence[tuple[str, dict[str, float]]],
) -> MetricsReport:
    """Support-weighted precision/recall/F1, multiclass MCC, one-vs-rest AUC.

    `scores` carries one (true_label, per-class decision values) entry per
    evaluated query; its argmax predictions must reproduce `confusion`.
    """
    labels = confusion.labels
    rebuilt = ConfusionMatrix.from_pairs(
        labels, ((true, argmax_by_score(s)) for true, s in scores)
    )
    if not np.array_equal(rebuilt.matrix, confusion.matrix):
        raise InternalError("confusion matrix disagrees with score argmax")

    m = confusion.matrix.astype(np.float64)
    support = m.sum(axis=1)
    notes = []
    per_class: dict[str, dict[str, float]] = {}
    for i, label in enumerate(labels):
        tp = m[i, i]
        predicted = m[:, i].sum()
        precision = tp / predicted if predicted > 0 else 0.0
        recall = tp / support[i] if support[i] > 0 else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        per_class[label] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "support": float(support[i]),
        }
        if support[i] == 0:
            notes.append(f"class {label!r} absent from ground truth; excluded")
            log.warning("class %r absent from ground truth; excluded", label)

    present = [i for i in range(len(labels)) if support[i] > 0]
    weights = support[present] / support[present].sum()
    precision = float(
        np.sum(weights * [per_class[labels[i]]["precision"] for i in present])
    )
    recall = float(np.sum(weights * [per_class[labels[i]]["recall"] for i in present]))
    f1 = float(np.sum(weights * [per_class[labels[i]]["f1"] for i in present]))

    auc_values = {}
    true_labels = np.asarray([true for true, _ in scores], dtype=object)
    for i in present:
        label = labels[i]
        is_positive = true_labels == label
        if is_positive.all():
            notes.append(f"class {label!r} has no negatives; excluded from AUC")
            log.warning("class %r has no negatives; excluded from AUC", label)
            continue
        class_scores = np.asarray([s.get(label, 0.0) for _, s in scores])
        auc_values[label] = _one_vs_rest_auc(is_positive, class_scores)
        per_class[label]["auc"] = auc_values[label]
    if auc_values:
        auc_support = np.asarray([per_class[c]["support"] for c in auc_values])
        auc = float(
            np.sum(
                auc_support / auc_support.sum() * np.asarray(list(auc_values.values()))
            )
        )
    else:
        auc = 0.0
        notes.append("AUC undefined for every class")

    report = MetricsReport(
        precision=precision,
        recall=recall,
        f1=f1,
        mcc=_multiclass_mcc(confusion.matrix),
        auc=auc,
        per_class=per_class,
        notes=tuple(notes),
    )
    for value in (report.precision, report.recall, report.f1):
        if not 0.0 <= value <= 1.0 + 1e-12:
            raise InternalError("metric out of range")
    if not -1.0 - 1e-12 <= report.mcc <= 1.0 + 1e-12:
        raise InternalError("MCC out of range")
    return report


# ---------------------------------------------------------------------------
# Experiment grid


@dataclass
class ExperimentConfig:
    k_folds: int = 4
    seed: int = 0
    support_k: int = 5
    fsl_aggregate: str = "max"
    fsl_output_dim: int = 512
    margin: float = 0.3
    num_pairs: int = 10000
    learning_rate: float = 0.01
    batch_size: int = 64
    knn_k: int = 5
    dt_max_depth: int | None = None
    dt_min_leaf: int = 1
    n_trees: int = 200
    svm_epochs: int = 200
    svm_lr: float = 0.01
    svm_reg: float = 1e-3
    jobs: int = 1

    def __post_init__(self):
        if self.jobs < 1:
            raise DataError("jobs must be >= 1")


@dataclass
class FoldResult:
    fold: int
    support: int
    report: MetricsReport


@dataclass
class CellReport:
    backend: str
    classifier: str
    folds: list[FoldResult]
    mean: dict[str, float]
    per_class_f1: dict[str, float]
    notes: tuple[str, ...] = ()


@dataclass
class ExperimentReport:
    corpus_size: int
    k_folds: int
    seed: int
    cells: list[CellReport] = field(default_factory=list)

    def cell(self, backend: str, classifier: str) -> CellReport:
        for cell in self.cells:
            if cell.backend == backend and cell.classifier == classifier:
                return cell
        raise DataError(f"no cell for ({backend}, {classifier})")

    def to_dict(self) -> dict:
        return {
            "corpus_size": self.corpus_size,
            "k_folds": self.k_folds,
            "seed": self.seed,
            "cells": [
                {
                    "backend": cell.backend,
                    "classifier": cell.classifier,
                    "mean": cell.mean,
                    "per_class_f1": cell.per_class_f1,
                    "notes": list(cell.notes),
                    "folds": [
                        {
                            "fold": fr.fold,
                            "support": fr.support,
                            "metrics": fr.report.summary(),
                            "per_class": fr.report.per_class,
                            "notes": list(fr.report.notes),
                        }
                        for fr in cell.folds
                    ],
                }
                for cell in self.cells
            ],
        }


def _fold_feature_matrix(
    backend: Backend,
    train_tests: Sequence[FlakyTest],
    eval_tests: Sequence[FlakyTest],
    stores: Mapping[Backend, EmbeddingStore],
):
    if backend is Backend.VOCAB:
        vocab = build_vocab(train_tests)
        train_X = np.stack([vocab_embed(t, vocab).values for t in train_tests])
        eval_X = np.stack([vocab_embed(t, vocab).values for t in eval_tests])
    else:
        if backend not in stores:
            raise DataError(f"no embedding store provided for {backend.value!r}")
        store = stores[backend]
        train_X = np.stack([store.values(t.id) for t in train_tests])
        eval_X = np.stack([store.values(t.id) for t in eval_tests])
    return train_X, eval_X


def _fold_scores(
    classifier: str,
    train_X,
    train_ids,
    train_labels,
    eval_X,
    config: ExperimentConfig,
    fold: int,
) -> list[dict[str, float]]:
    """Per-query per-class decision values for one fold."""
    if classifier == "fsl":
        t_config = siamese.TrainingConfig(
            margin=config.margin,
            num_pairs=config.num_pairs,
            learning_rate=config.learning_rate,
            batch_size=config.batch_size,
            seed=config.seed + fold,
        )
        model = siamese.train(
            train_X, train_labels, t_config, output_dim=config.fsl_output_dim
        )
        support = select_support(
            train_ids, train_X, train_labels, model, k=config.support_k
        )
        return [
            dict(
                classify(
                    x, model, support, aggregate=config.fsl_aggregate
                ).ranking
            )
            for x in eval_X
        ]
    if classifier == "knn":
        fitted = KNNClassifier(k=config.knn_k).fit(train_X, train_labels)
    elif classifier == "dt":
        fitted = DecisionTreeClassifier(
            max_depth=config.dt_max_depth, min_leaf=config.dt_min_leaf
        ).fit(train_X, train_labels)
    elif classifier == "rf":
        fitted = RandomForestClassifier(
            n_trees=config.n_trees,
            seed=config.seed + fold,
            max_depth=config.dt_max_depth,
            min_leaf=config.dt_min_leaf,
        ).fit(train_X, train_labels)
    elif classifier == "svm":
        fitted = LinearSVMClassifier(
            epochs=config.svm_epochs,
            learning_rate=config.svm_lr,
            reg=config.svm_reg,
        ).fit(train_X, train_labels)
    else:
        raise DataError(f"unknown classifier {classifier!r}")
    return [fitted.decision_scores(x) for x in eval_X]


def run_experiment(
    tests: Sequence[FlakyTest],
    backends: Sequence[Backend],
    classifiers: Sequence[str],
    config: ExperimentConfig | None = None,
    stores: Mapping[Backend, EmbeddingStore] | None = None,
) -> ExperimentReport:
    """4-fold CV over every (backend, classifier) cell.

    Every test, augmented or not, is evaluated exactly once: in the fold its
    lineage family was assigned to. Vocabulary models, Siamese training, and
    support selection only ever see training folds.
    """
    if config is None:
        config = ExperimentConfig()
    stores = stores or {}
    for name in classifiers:
        if name not in CLASSIFIER_NAMES:
            raise DataError(f"unknown classifier {name!r}")
    if not tests:
        raise DataError("empty corpus")

    assignment = stratified_group_kfold(tests, k=config.k_folds, seed=config.seed)
    all_labels = tuple(sorted({t.category.value for t in tests}))
    report = ExperimentReport(
        corpus_size=len(tests), k_folds=config.k_folds, seed=config.seed
    )

    def build_cell(backend: Backend, classifier: str) -> CellReport:
        folds = []
        for fold in range(config.k_folds):
            train_tests = [t for t in tests if assignment[t.id] != fold]
            eval_tests = [t for t in tests if assignment[t.id] == fold]
            train_X, eval_X = _fold_feature_matrix(
                backend, train_tests, eval_tests, stores
            )
            train_labels = [t.category.value for t in train_tests]
            train_ids = [t.id for t in train_tests]
            score_dicts = _fold_scores(
                classifier,
                train_X,
                train_ids,
                train_labels,
                eval_X,
                config,
                fold,
            )
            paired = [
                (t.category.value, s) for t, s in zip(eval_tests, score_dicts)
            ]
            confusion = ConfusionMatrix.from_pairs(
                all_labels,
                ((true, argmax_by_score(s)) for true, s in paired),
            )
            folds.append(
                FoldResult(
                    fold=fold,
                    support=len(eval_tests),
                    report=compute_metrics(confusion, paired),
                )
            )
        if sum(fr.support for fr in folds) != len(tests):
            raise InternalError("per-fold supports do not sum to corpus size")
        mean = {
            key: float(np.mean([fr.report.summary()[key] for fr in folds]))
            for key in ("precision", "recall", "f1", "mcc", "auc")
        }
        per_class_f1 = {}
        for label in all_labels:
            values = [
                fr.report.per_class[label]["f1"]
                for fr in folds
                if fr.report.per_class[label]["support"] > 0
            ]
            if values:
                per_class_f1[label] = float(np.mean(values))
        notes = (SVM_KERNEL_NOTE,) if classifier == "svm" else ()
        return CellReport(
            backend=backend.value,
            classifier=classifier,
            folds=folds,
            mean=mean,
            per_class_f1=per_class_f1,
            notes=notes,
        )

    cells = [
        (backend, classifier)
        for backend in sorted(backends, key=lambda b: b.value)
        for classifier in sorted(classifiers)
    ]
    if config.jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            report.cells.extend(pool.map(lambda pair: build_cell(*pair), cells))
    else:
        report.cells.extend(build_cell(b, c) for b, c in cells)
    return report


def render_text(report: ExperimentReport) -> str:
    """Aligned, deterministic text rendering of the experiment grid."""
    lines = [
        f"corpus size {report.corpus_size}, {report.k_folds}-fold CV, seed {report.seed}",
        "",
    ]
    metrics = ("precision", "recall", "mcc", "f1", "auc")
    backends = sorted({cell.backend for cell in report.cells})
    for backend in backends:
        lines.append(f"backend: {backend}")
        header = f"  {'classifier':<12}" + "".join(f"{m:>11}" for m in metrics)
        lines.append(header)
        for cell in report.cells:
            if cell.backend != backend:
                continue
            row = f"  {cell.classifier:<12}" + "".join(
                f"{cell.mean[m]:>11.4f}" for m in metrics
            )
            lines.append(row)
        lines.append("")
        for cell in report.cells:
            if cell.backend != backend:
                continue
            lines.append(f"  per-category F1 ({cell.classifier} @ {backend}):")
            for label, value in sorted(cell.per_class_f1.items()):
                lines.append(f"    {label:<24}{value:>8.4f}")
            for note in cell.notes:
                lines.append(f"    note: {note}")
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"


def save_report(report: ExperimentReport, json_path, text_path=None) -> None:
    with open(json_path, "w", encoding="utf-8") as handle:
        json.dump(report.to_dict(), handle, indent=2, sort_keys=True)
        handle.write("\n")
    if text_path is not None:
        Path(text_path).write_text(render_text(report), encoding="utf-8")


# ---------------------------------------------------------------------------
# Margin/pairs sweep and transformed-vector dump

SWEEP_MARGINS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
SWEEP_PAIR_COUNTS = (2500, 5000, 10000, 20000)


def sweep(
    tests: Sequence[FlakyTest],
    backend: Backend,
    config: ExperimentConfig | None = None,
    stores: Mapping[Backend, EmbeddingStore] | None = None,
    margins: Sequence[float] = SWEEP_MARGINS,
    pair_counts: Sequence[int] = SWEEP_PAIR_COUNTS,
) -> list[dict[str, float]]:
    """FSL grid over margin x pair count; one row per combination."""
    if config is None:
        config = ExperimentConfig()
    rows = []
    for margin in margins:
        for num_pairs in pair_counts:
            cell_config = ExperimentConfig(**{**config.__dict__})
            cell_config.margin = margin
            cell_config.num_pairs = num_pairs
            result = run_experiment(
                tests, [backend], ["fsl"], cell_config, stores
            ).cell(backend.value, "fsl")
            row = {"margin": margin, "num_pairs": num_pairs}
            row.update(result.mean)
            rows.append(row)
    return rows


def sweep_csv(rows: Sequence[dict[str, float]]) -> str:
    header = ["margin", "num_pairs", "precision", "recall", "f1", "mcc", "auc"]
    lines = [",".join(header)]
    for row in rows:
        lines.append(
            ",".join(
                f"{row[key]:.6f}" if key != "num_pairs" else str(int(row[key]))
                for key in header
            )
        )
    return "\n".join(lines) + "\n"


def transformed_csv(
    model: siamese.SiameseModel,
    tests: Sequence[FlakyTest],
    vectors: np.ndarray,
) -> str:
    """CSV of post-projection unit vectors for external plotting."""
    Y = siamese.forward_many(model, np.asarray(vectors, dtype=np.float64))
    header = ["id", "category"] + [f"c{i}" for i in range(Y.shape[1])]
    lines = [",".join(header)]
    for test, row in zip(tests, Y):
        lines.append(
            ",".join([test.id, test.category.value] + [f"{v:.8f}" for v in row])
        )
    return "\n".join(lines) + "\n"
