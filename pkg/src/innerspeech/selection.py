"""Feature ranking and selection: ANOVA F, chi-square, mutual information,
Pearson, ReliefF, PCA, and the greedy relevance/redundancy (MRMR) picker,
plus the K-sweep harness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .trialset import _frozen

RANKER_METHODS = ("anova_f", "chi_square", "mutual_info", "pearson", "relieff")
MRMR_VARIANTS = ("FCQ", "MIQ")

_EPS = 1e-12
_MI_BINS = 10


@dataclass(frozen=True)
class RankedFeatures:
    """Ordered column indices, best first, with aligned scores."""

    method: str
    ordered_indices: np.ndarray
    scores: np.ndarray
    K: int
    params: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ordered_indices", _frozen(np.asarray(self.ordered_indices, dtype=np.int64)))
        object.__setattr__(self, "scores", _frozen(np.asarray(self.scores, dtype=np.float64)))
        if self.ordered_indices.size != np.unique(self.ordered_indices).size:
            raise ValidationError("ranked indices must be unique")
        if self.ordered_indices.size < self.K:
            raise ValidationError("ranking shorter than requested K")
        if self.scores.shape != self.ordered_indices.shape:
            raise ValidationError("scores misaligned with indices")
        if not np.all(np.isfinite(self.scores)):
            raise ValidationError("non-finite ranking scores")

    def top(self, k: int | None = None) -> np.ndarray:
        return np.array(self.ordered_indices[: self.K if k is None else k])


@dataclass(frozen=True)
class PcaTransform:
    """Top-m principal axes of the column-centered data."""

    components: np.ndarray  # (p, m), orthonormal columns
    explained_variance_ratio: np.ndarray  # (m,), non-increasing
    means: np.ndarray  # (p,)

    def __post_init__(self):
        for name in ("components", "explained_variance_ratio", "means"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype=np.float64)))


def _validate_xy(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValidationError("X must be 2-D with one label per row")
    classes = np.unique(y)
    if classes.size < 2:
        raise ValidationError("ranking needs at least 2 classes present")
    return X, y, classes.size


def _constant_mask(X: np.ndarray) -> np.ndarray:
    """Exactly-constant columns (range test is exact, unlike axis-0 variance)."""
    return X.max(axis=0) == X.min(axis=0)


def _anova_f_scores(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    n, p = X.shape
    classes = np.unique(y)
    grand = X.mean(axis=0)
    ssb = np.zeros(p)
    ssw = np.zeros(p)
    for c in classes:
        sub = X[y == c]
        mu = sub.mean(axis=0)
        ssb += sub.shape[0] * (mu - grand) ** 2
        ssw += np.sum((sub - mu) ** 2, axis=0)
    dfb = classes.size - 1
    dfw = n - classes.size
    if dfw <= 0:
        raise ValidationError("anova_f needs more samples than classes")
    msb = ssb / dfb
    msw = ssw / dfw
    scores = np.zeros(p)
    ok = msw > 0
    scores[ok] = msb[ok] / msw[ok]
    # Perfectly separated columns (zero within-class variance but real
    # between-class variance) get a large finite score instead of inf.
    degenerate = (~ok) & (msb > 0)
    scores[degenerate] = msb[degenerate] / _EPS
    scores[_constant_mask(X)] = 0.0
    return scores


def _chi_square_scores(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    n, p = X.shape
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    scaled = np.where(span > 0, (X - lo) / np.where(span > 0, span, 1.0), 0.0)
    classes = np.unique(y)
    onehot = (y[:, None] == classes[None, :]).astype(np.float64)
    observed = scaled.T @ onehot  # (p, C) per-class mass
    feature_total = scaled.sum(axis=0)
    class_frac = onehot.sum(axis=0) / n
    expected = feature_total[:, None] * class_frac[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = np.where(expected > 0, (observed - expected) ** 2 / expected, 0.0)
    scores = terms.sum(axis=1)
    scores[span == 0] = 0.0
    return scores


def _discretize(X: np.ndarray, bins: int = _MI_BINS) -> np.ndarray:
    """Equal-width binning of each column over its observed range."""
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    safe = np.where(span > 0, span, 1.0)
    idx = np.floor((X - lo) / safe * bins).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def _mi_from_codes(a: np.ndarray, na: int, b: np.ndarray, nb: int) -> float:
    """Plug-in mutual information (nats) between two integer code vectors."""
    n = a.size
    joint = np.bincount(a * nb + b, minlength=na * nb).astype(np.float64).reshape(na, nb)
    joint /= n
    pa = joint.sum(axis=1)
    pb = joint.sum(axis=0)
    outer = pa[:, None] * pb[None, :]
    nz = joint > 0
    return float(np.sum(joint[nz] * np.log(joint[nz] / outer[nz])))


def _mutual_info_scores(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    codes = _discretize(X)
    classes, y_codes = np.unique(y, return_inverse=True)
    scores = np.array(
        [_mi_from_codes(codes[:, j], _MI_BINS, y_codes, classes.size) for j in range(X.shape[1])]
    )
    scores[_constant_mask(X)] = 0.0
    return scores


def _pearson_scores(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    n = X.shape[0]
    classes = np.unique(y)
    onehot = (y[:, None] == classes[None, :]).astype(np.float64)
    xs = X.std(axis=0)
    ys = onehot.std(axis=0)
    xc = X - X.mean(axis=0)
    yc = onehot - onehot.mean(axis=0)
    cov = xc.T @ yc / n
    denom = xs[:, None] * ys[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(denom > 0, cov / denom, 0.0)
    scores = np.abs(corr).max(axis=1)
    scores[_constant_mask(X)] = 0.0
    return scores


def _relieff_scores(X: np.ndarray, y: np.ndarray, k: int = 10) -> np.ndarray:
    """ReliefF with k nearest hits/misses per class over all instances.

    Distances are Euclidean on z-scored features; per-feature diffs are
    normalized by the feature's range so weights stay in [-1, 1].
    """
    n, p = X.shape
    mu = X.mean(axis=0)
    sd = np.maximum(X.std(axis=0), _EPS)
    Z = (X - mu) / sd
    span = Z.max(axis=0) - Z.min(axis=0)
    active = span > 0
    safe_span = np.where(active, span, 1.0)

    classes = np.unique(y)
    priors = {int(c): np.sum(y == c) / n for c in classes}
    za = Z[:, active]
    sq = np.sum(za**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (za @ za.T)
    np.fill_diagonal(d2, np.inf)

    weights = np.zeros(p)
    members_by_class = {int(c): np.nonzero(y == c)[0] for c in classes}
    for i in range(n):
        ci = int(y[i])
        for c in classes:
            members = members_by_class[int(c)]
            if c == ci:
                members = members[members != i]
            if members.size == 0:
                continue
            order = members[np.argsort(d2[i, members], kind="stable")]
            nearest = order[: min(k, order.size)]
            diffs = np.abs(Z[nearest] - Z[i]).mean(axis=0) / safe_span
            if c == ci:
                weights -= diffs / n
            else:
                weights += (priors[int(c)] / (1.0 - priors[ci])) * diffs / n
    weights[~active] = 0.0
    weights[_constant_mask(X)] = 0.0
    return weights


def rank_features(X: np.ndarray, y: np.ndarray, method: str, relieff_k: int = 10) -> RankedFeatures:
    """Score every column and sort descending (ties break on lower index)."""
    X, y, _ = _validate_xy(X, y)
    if method == "anova_f":
        scores = _anova_f_scores(X, y)
    elif method == "chi_square":
        scores = _chi_square_scores(X, y)
    elif method == "mutual_info":
        scores = _mutual_info_scores(X, y)
    elif method == "pearson":
        scores = _pearson_scores(X, y)
    elif method == "relieff":
        scores = _relieff_scores(X, y, k=relieff_k)
    else:
        raise ValidationError(f"unknown ranking method {method!r}; supported: {RANKER_METHODS}")
    order = np.lexsort((np.arange(scores.size), -scores))
    params = (("relieff_k", str(relieff_k)),) if method == "relieff" else ()
    return RankedFeatures(
        method=method, ordered_indices=order, scores=scores[order], K=scores.size, params=params
    )


def mrmr_select(X: np.ndarray, y: np.ndarray, K: int, variant: str = "FCQ") -> RankedFeatures:
    """Greedy minimum-redundancy / maximum-relevance selection.

    Step score = relevance(f) / (redundancy(f | selected) + eps). FCQ uses
    ANOVA F relevance and mean |Pearson correlation| redundancy; MIQ uses
    mutual information for both (10-bin discretization). The result for a
    smaller K is always a prefix of the result for a larger K.
    """
    X, y, _ = _validate_xy(X, y)
    n, p = X.shape
    if not (1 <= K <= p):
        raise ValidationError(f"K={K} out of range [1, {p}]")
    if variant not in MRMR_VARIANTS:
        raise ValidationError(f"unknown MRMR variant {variant!r}; supported: {MRMR_VARIANTS}")

    if variant == "FCQ":
        relevance = _anova_f_scores(X, y)
        const = _constant_mask(X)
        sd = X.std(axis=0)
        xc = (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
        xc[:, const] = 0.0

        def redundancy_with(j: int) -> np.ndarray:
            return np.abs(xc.T @ xc[:, j]) / n
    else:
        relevance = _mutual_info_scores(X, y)
        codes = _discretize(X)

        def redundancy_with(j: int) -> np.ndarray:
            return np.array(
                [_mi_from_codes(codes[:, i], _MI_BINS, codes[:, j], _MI_BINS) for i in range(p)]
            )

    selected: list[int] = []
    pick_scores: list[float] = []
    redundancy_sum = np.zeros(p)
    candidate = relevance.copy()
    for step in range(K):
        if step == 0:
            scores = candidate
        else:
            scores = candidate / (redundancy_sum / step + _EPS)
        masked = scores.copy()
        masked[selected] = -np.inf
        pick = int(np.argmax(masked))
        selected.append(pick)
        pick_scores.append(float(masked[pick]))
        if step < K - 1:
            redundancy_sum += redundancy_with(pick)
    return RankedFeatures(
        method=f"mrmr_{variant.lower()}",
        ordered_indices=np.array(selected),
        scores=np.array(pick_scores),
        K=K,
        params=(("variant", variant),),
    )


def pca_fit(X: np.ndarray, m: int) -> PcaTransform:
    """Top-m principal axes via eigendecomposition of the covariance.

    Uses the Gram-matrix route when p > n so paper-scale matrices stay
    tractable; components are sign-fixed (largest-magnitude entry positive)
    for determinism.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValidationError("pca_fit expects a 2-D matrix")
    n, p = X.shape
    if not (1 <= m <= min(n - 1, p)):
        raise ValidationError(f"m={m} out of range [1, min(n-1={n - 1}, p={p})]")
    means = X.mean(axis=0)
    Xc = X - means
    if p <= n:
        cov = (Xc.T @ Xc) / (n - 1)
        eigvals, eigvecs = np.linalg.eigh(cov)
        eigvals = eigvals[::-1]
        eigvecs = eigvecs[:, ::-1]
    else:
        gram = (Xc @ Xc.T) / (n - 1)
        gvals, gvecs = np.linalg.eigh(gram)
        gvals = gvals[::-1]
        gvecs = gvecs[:, ::-1]
        keep = gvals > _EPS
        eigvals = np.where(keep, gvals, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            eigvecs = Xc.T @ gvecs / np.where(keep, np.sqrt(np.maximum(gvals, _EPS) * (n - 1)), 1.0)
    total = float(np.sum(np.maximum(eigvals, 0.0)))
    comps = eigvecs[:, :m].copy()
    for j in range(m):
        lead = int(np.argmax(np.abs(comps[:, j])))
        if comps[lead, j] < 0:
            comps[:, j] = -comps[:, j]
    ratios = np.maximum(eigvals[:m], 0.0) / total if total > 0 else np.zeros(m)
    return PcaTransform(components=comps, explained_variance_ratio=ratios, means=means)


def pca_apply(X: np.ndarray, transform: PcaTransform) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != transform.means.size:
        raise ValidationError(
            f"pca transform fitted for {transform.means.size} columns, got {X.shape[-1]}"
        )
    return (X - transform.means) @ transform.components


@dataclass(frozen=True)
class SweepRow:
    K: int
    accuracy_pct: float
    macro_f1_pct: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    best_k: int

    def to_csv(self) -> str:
        lines = ["K,accuracy_pct,macro_f1_pct"]
        lines += [f"{r.K},{r.accuracy_pct:.4f},{r.macro_f1_pct:.4f}" for r in self.rows]
        return "\n".join(lines) + "\n"


def k_sweep(fm, pipeline_template, k_values, cv_folds: int = 10, seed: int = 0, protocol: str = "leakage_safe") -> SweepResult:
    """Run cross-validation at each K of the grid and flag the argmax-K."""
    from . import evaluation  # local import to avoid a module cycle

    k_values = [int(k) for k in k_values]
    if not k_values or any(k < 1 for k in k_values):
        raise ValidationError("k_sweep needs a grid of positive K values")
    rows = []
    for k in k_values:
        pipeline = pipeline_template.with_k(k)
        report = evaluation.cross_validate(fm, pipeline, k=cv_folds, seed=seed, protocol=protocol)
        rows.append(SweepRow(K=k, accuracy_pct=report.accuracy_pct, macro_f1_pct=report.macro_f1_pct))
    best = max(rows, key=lambda r: (r.accuracy_pct, -r.K))
    return SweepResult(rows=tuple(rows), best_k=best.K)
