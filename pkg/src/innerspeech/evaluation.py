"""Stratified k-fold cross-validation with pooled out-of-fold predictions,
confusion-matrix metrics, and comparison-table rendering."""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import NumericalError, ValidationError
from .features import FeatureMatrix, fit_scaler
from .selection import MRMR_VARIANTS, RANKER_METHODS, mrmr_select, pca_apply, pca_fit, rank_features
from .trialset import _frozen

PROTOCOLS = ("leakage_safe", "paper_protocol")

SELECTOR_METHODS = RANKER_METHODS + ("mrmr_fcq", "mrmr_miq", "pca", "none")


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray  # (n,) fold index per trial
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "assignments", _frozen(np.asarray(self.assignments, dtype=np.int64)))

    def test_rows(self, fold: int) -> np.ndarray:
        return np.nonzero(self.assignments == fold)[0]

    def train_rows(self, fold: int) -> np.ndarray:
        return np.nonzero(self.assignments != fold)[0]


def stratified_kfold(labels: np.ndarray, k: int, seed: int) -> FoldPlan:
    """Per-class round-robin assignment over a seeded shuffle.

    Every class must have at least k members; per-class fold counts then
    differ by at most one.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if k < 2:
        raise ValidationError("k must be >= 2")
    rng = np.random.default_rng(seed)
    assignments = np.full(labels.shape[0], -1, dtype=np.int64)
    for c in np.unique(labels):
        idx = np.nonzero(labels == c)[0]
        if idx.size < k:
            raise ValidationError(f"class {c} has {idx.size} trials, fewer than k={k}")
        perm = rng.permutation(idx)
        assignments[perm] = np.arange(perm.size) % k
    return FoldPlan(k=k, assignments=assignments, seed=seed)


# -- metrics -----------------------------------------------------------------


@dataclass(frozen=True)
class ClassMetrics:
    precision_pct: float
    recall_pct: float
    f1_pct: float


@dataclass(frozen=True)
class MetricSet:
    confusion: np.ndarray  # rows = truth, cols = prediction
    accuracy_pct: float
    macro_f1_pct: float
    micro_f1_pct: float
    per_class: tuple[ClassMetrics, ...]

    def __post_init__(self):
        object.__setattr__(self, "confusion", _frozen(np.asarray(self.confusion, dtype=np.int64)))


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> np.ndarray:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    conf = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(conf, (y_true, y_pred), 1)
    return conf


def metrics_from_confusion(confusion: np.ndarray) -> MetricSet:
    """Accuracy and per-class / macro / micro F1 from a confusion matrix.

    Per class: TP is the diagonal entry, FP the column residue, FN the row
    residue; F1 = 2TP / (2TP + FP + FN). Classes absent from both truth and
    prediction contribute F1 = 0.
    """
    conf = np.asarray(confusion)
    if conf.ndim != 2 or conf.shape[0] != conf.shape[1]:
        raise ValidationError("confusion matrix must be square")
    if np.any(conf < 0) or not np.issubdtype(conf.dtype, np.number):
        raise ValidationError("confusion matrix must hold non-negative counts")
    conf = conf.astype(np.int64)
    total = int(conf.sum())
    if total == 0:
        raise ValidationError("empty confusion matrix")
    tp = np.diag(conf)
    fp = conf.sum(axis=0) - tp
    fn = conf.sum(axis=1) - tp
    accuracy = 100.0 * float(tp.sum()) / total
    per_class = []
    f1s = []
    for c in range(conf.shape[0]):
        denom_p = tp[c] + fp[c]
        denom_r = tp[c] + fn[c]
        precision = 100.0 * tp[c] / denom_p if denom_p > 0 else 0.0
        recall = 100.0 * tp[c] / denom_r if denom_r > 0 else 0.0
        denom_f = 2 * tp[c] + fp[c] + fn[c]
        f1 = 100.0 * 2 * tp[c] / denom_f if denom_f > 0 else 0.0
        per_class.append(ClassMetrics(float(precision), float(recall), float(f1)))
        f1s.append(f1)
    micro_denom = 2 * tp.sum() + fp.sum() + fn.sum()
    micro_f1 = 100.0 * 2 * tp.sum() / micro_denom if micro_denom > 0 else 0.0
    return MetricSet(
        confusion=conf,
        accuracy_pct=accuracy,
        macro_f1_pct=float(np.mean(f1s)),
        micro_f1_pct=float(micro_f1),
        per_class=tuple(per_class),
    )


# -- pipeline spec ------------------------------------------------------------


@dataclass(frozen=True)
class SelectorSpec:
    method: str
    k: int
    variant_params: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.method not in SELECTOR_METHODS:
            raise ValidationError(
                f"unknown selector {self.method!r}; supported: {SELECTOR_METHODS}"
            )
        if self.method != "none" and self.k < 1:
            raise ValidationError("selector k must be >= 1")


@dataclass(frozen=True)
class PipelineSpec:
    """What cross_validate runs inside each fold: scaler, selector, model."""

    model_factory: Callable[[], object]
    selector: SelectorSpec | None = None
    scale: bool = True
    name: str = ""

    def with_k(self, k: int) -> "PipelineSpec":
        if self.selector is None:
            raise ValidationError("pipeline has no selector to re-parameterize")
        return replace(self, selector=replace(self.selector, k=k))

    def describe(self) -> str:
        parts = []
        if self.scale:
            parts.append("zscore")
        if self.selector is not None and self.selector.method != "none":
            parts.append(f"{self.selector.method}(K={self.selector.k})")
        model = self.model_factory()
        desc = model.describe() if hasattr(model, "describe") else type(model).__name__
        parts.append(desc)
        return self.name or " -> ".join(parts)


def _fit_selector(spec: SelectorSpec | None, X: np.ndarray, y: np.ndarray):
    if spec is None or spec.method == "none":
        return None
    if spec.method in RANKER_METHODS:
        ranked = rank_features(X, y, spec.method)
        return ("columns", ranked.top(spec.k))
    if spec.method in ("mrmr_fcq", "mrmr_miq"):
        variant = "FCQ" if spec.method == "mrmr_fcq" else "MIQ"
        return ("columns", mrmr_select(X, y, K=spec.k, variant=variant).top())
    if spec.method == "pca":
        return ("pca", pca_fit(X, spec.k))
    raise ValidationError(f"unknown selector {spec.method!r}")


def _apply_selector(fitted, X: np.ndarray) -> np.ndarray:
    if fitted is None:
        return X
    kind, payload = fitted
    if kind == "columns":
        return X[:, payload]
    return pca_apply(X, payload)


# -- cross-validation -----------------------------------------------------------


@dataclass(frozen=True)
class FoldMetrics:
    fold: int
    n_test: int
    accuracy_pct: float
    macro_f1_pct: float


@dataclass(frozen=True)
class EvalReport:
    confusion: np.ndarray
    accuracy_pct: float
    macro_f1_pct: float
    micro_f1_pct: float
    per_class: tuple[ClassMetrics, ...]
    per_fold: tuple[FoldMetrics, ...]
    protocol: str
    pipeline: str
    k: int
    seed: int
    elapsed_s: float
    predictions: np.ndarray  # pooled out-of-fold predictions, one per trial

    def __post_init__(self):
        object.__setattr__(self, "confusion", _frozen(np.asarray(self.confusion, dtype=np.int64)))
        object.__setattr__(self, "predictions", _frozen(np.asarray(self.predictions, dtype=np.int64)))

    def to_json_dict(self) -> dict:
        return {
            "accuracy_pct": self.accuracy_pct,
            "macro_f1_pct": self.macro_f1_pct,
            "micro_f1_pct": self.micro_f1_pct,
            "confusion": self.confusion.tolist(),
            "per_class": [
                {"precision_pct": m.precision_pct, "recall_pct": m.recall_pct, "f1_pct": m.f1_pct}
                for m in self.per_class
            ],
            "per_fold": [
                {
                    "fold": f.fold,
                    "n_test": f.n_test,
                    "accuracy_pct": f.accuracy_pct,
                    "macro_f1_pct": f.macro_f1_pct,
                }
                for f in self.per_fold
            ],
            "protocol": self.protocol,
            "pipeline": self.pipeline,
            "k": self.k,
            "seed": self.seed,
            "elapsed_s": self.elapsed_s,
        }


def cross_validate(
    fm: FeatureMatrix,
    pipeline: PipelineSpec,
    k: int = 10,
    seed: int = 0,
    protocol: str = "leakage_safe",
) -> EvalReport:
    """Pooled out-of-fold evaluation.

    leakage_safe (default): scaler and selector are fit inside each fold on
    the training rows only. paper_protocol: the selector is fit once on the
    full (full-data-scaled) matrix before folding; per-fold model scalers
    remain train-fit. Any fold failure aborts with context.
    """
    if protocol not in PROTOCOLS:
        raise ValidationError(f"unknown protocol {protocol!r}; supported: {PROTOCOLS}")
    start = time.perf_counter()
    n_classes = fm.n_classes
    labels = fm.labels
    plan = stratified_kfold(labels, k, seed)

    global_selector = None
    if protocol == "paper_protocol":
        full_scaler = fit_scaler(fm)
        global_selector = _fit_selector(pipeline.selector, full_scaler.transform(fm.values), labels)

    pooled = np.full(fm.n_trials, -1, dtype=np.int64)
    per_fold = []
    for fold in range(k):
        train = plan.train_rows(fold)
        test = plan.test_rows(fold)
        try:
            Xtr = fm.values[train]
            Xte = fm.values[test]
            if pipeline.scale:
                scaler = fit_scaler(fm, train)
                Xtr = scaler.transform(Xtr)
                Xte = scaler.transform(Xte)
            selector = (
                global_selector
                if protocol == "paper_protocol"
                else _fit_selector(pipeline.selector, Xtr, labels[train])
            )
            Xtr = _apply_selector(selector, Xtr)
            Xte = _apply_selector(selector, Xte)
            model = pipeline.model_factory()
            model.fit(Xtr, labels[train], n_classes=n_classes)
            pred = np.asarray(model.predict(Xte), dtype=np.int64)
        except (ValidationError, NumericalError) as exc:
            raise type(exc)(f"fold {fold}: {exc}") from exc
        pooled[test] = pred
        fold_metrics = metrics_from_confusion(confusion_matrix(labels[test], pred, n_classes))
        per_fold.append(
            FoldMetrics(
                fold=fold,
                n_test=int(test.size),
                accuracy_pct=fold_metrics.accuracy_pct,
                macro_f1_pct=fold_metrics.macro_f1_pct,
            )
        )
    if np.any(pooled < 0):
        raise NumericalError("cross-validation did not predict every trial")
    metrics = metrics_from_confusion(confusion_matrix(labels, pooled, n_classes))
    return EvalReport(
        confusion=metrics.confusion,
        accuracy_pct=metrics.accuracy_pct,
        macro_f1_pct=metrics.macro_f1_pct,
        micro_f1_pct=metrics.micro_f1_pct,
        per_class=metrics.per_class,
        per_fold=tuple(per_fold),
        protocol=protocol,
        pipeline=pipeline.describe(),
        k=k,
        seed=seed,
        elapsed_s=time.perf_counter() - start,
        predictions=pooled,
    )


# -- report rendering -------------------------------------------------------------


def comparison_table(rows: list[tuple[str, float, float]]) -> tuple[str, str]:
    """(csv, plain text) in the model/accuracy/F1 row format."""
    if not rows:
        raise ValidationError("comparison table needs at least one row")
    csv_lines = ["name,accuracy_pct,f1_pct"]
    csv_lines += [f"{name},{acc:.2f},{f1:.2f}" for name, acc, f1 in rows]
    width = max(len(r[0]) for r in rows)
    width = max(width, len("Model"))
    text_lines = [f"{'Model':<{width}}  Accuracy (%)  F1 Score (%)"]
    text_lines += [f"{name:<{width}}  {acc:>12.2f}  {f1:>12.2f}" for name, acc, f1 in rows]
    return "\n".join(csv_lines) + "\n", "\n".join(text_lines) + "\n"


def subject_table(entries: list[tuple[str, float, float]]) -> tuple[str, str]:
    """Per-subject rows plus an Overall row (mean across subjects)."""
    if not entries:
        raise ValidationError("subject table needs at least one subject")
    mean_acc = float(np.mean([acc for _, acc, _ in entries]))
    mean_f1 = float(np.mean([f1 for _, _, f1 in entries]))
    rows = list(entries) + [("Overall", mean_acc, mean_f1)]
    csv_lines = ["subject,accuracy_pct,f1_pct"]
    csv_lines += [f"{s},{a:.2f},{f:.2f}" for s, a, f in rows]
    width = max(max(len(r[0]) for r in rows), len("Subject"))
    text_lines = [f"{'Subject':<{width}}  Accuracy (%)  F1 Score (%)"]
    text_lines += [f"{s:<{width}}  {a:>12.2f}  {f:>12.2f}" for s, a, f in rows]
    return "\n".join(csv_lines) + "\n", "\n".join(text_lines) + "\n"


def confusion_csv(confusion: np.ndarray, class_names: tuple[str, ...]) -> str:
    conf = np.asarray(confusion)
    lines = ["truth\\pred," + ",".join(class_names)]
    for i, name in enumerate(class_names):
        lines.append(name + "," + ",".join(str(int(v)) for v in conf[i]))
    return "\n".join(lines) + "\n"


def confusion_text(confusion: np.ndarray, class_names: tuple[str, ...]) -> str:
    """Row-normalized percentage grid."""
    conf = np.asarray(confusion, dtype=np.float64)
    row_sums = conf.sum(axis=1, keepdims=True)
    norm = np.where(row_sums > 0, 100.0 * conf / np.where(row_sums > 0, row_sums, 1.0), 0.0)
    width = max(max(len(n) for n in class_names), 7)
    header = " " * (width + 2) + "  ".join(f"{n:>{width}}" for n in class_names)
    lines = [header]
    for i, name in enumerate(class_names):
        cells = "  ".join(f"{norm[i, j]:>{width}.2f}" for j in range(len(class_names)))
        lines.append(f"{name:>{width}}  {cells}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RenderedReport:
    comparison_csv: str
    comparison_text: str
    confusions_csv: dict[str, str]
    confusions_text: dict[str, str]


def render_report(
    reports: dict[str, EvalReport],
    class_names: tuple[str, ...],
    extra_rows: list[tuple[str, float, float]] = (),
) -> RenderedReport:
    """Comparison tables for a set of named reports, plus optional externally
    supplied rows (for published baselines)."""
    if not reports and not extra_rows:
        raise ValidationError("render_report needs at least one report")
    rows = [(name, r.accuracy_pct, r.macro_f1_pct) for name, r in reports.items()]
    rows += list(extra_rows)
    csv_text, plain = comparison_table(rows)
    return RenderedReport(
        comparison_csv=csv_text,
        comparison_text=plain,
        confusions_csv={n: confusion_csv(r.confusion, class_names) for n, r in reports.items()},
        confusions_text={n: confusion_text(r.confusion, class_names) for n, r in reports.items()},
    )
