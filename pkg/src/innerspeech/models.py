"""Multinomial logistic regression and shrinkage LDA with in-repo training,
the stacked five-model logistic-regression ensemble, and EIM1 serialization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._binio import Reader, Writer
from .errors import NumericalError, ValidationError
from .features import Scaler
from .trialset import _frozen

EIM1_MAGIC = b"EIM1"
EIM1_VERSION = 1

DEFAULT_ENSEMBLE_LAMBDAS = (100.0, 10.0, 1.0, 0.1, 0.01)

_ARMIJO_C = 1e-4
_MIN_STEP = 1e-20


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _add_bias(X: np.ndarray) -> np.ndarray:
    return np.hstack([X, np.ones((X.shape[0], 1))])


@dataclass(frozen=True)
class LogRegModel:
    """Softmax regression; weights are (C, p+1) with the bias in the last column."""

    weights: np.ndarray
    l2_lambda: float
    iterations: int
    final_loss: float
    final_grad_norm: float
    loss_trace: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", _frozen(np.asarray(self.weights, dtype=np.float64)))
        if not np.all(np.isfinite(self.weights)):
            raise NumericalError("logistic model weights are non-finite")

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def n_features(self) -> int:
        return self.weights.shape[1] - 1

    # fit/predict protocol used by the evaluation harness
    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return logreg_predict_proba(self, X)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return logreg_predict(self, X)


def _logreg_loss_grad(W, Xb, onehot, l2_lambda, want_grad=True):
    n = Xb.shape[0]
    logits = Xb @ W.T
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    log_probs = shifted - log_z[:, None]
    loss = -np.sum(log_probs * onehot) / n
    loss += 0.5 * l2_lambda * np.sum(W[:, :-1] ** 2) / n
    if not want_grad:
        return loss, None
    probs = np.exp(log_probs)
    grad = (probs - onehot).T @ Xb / n
    grad[:, :-1] += l2_lambda * W[:, :-1] / n
    return loss, grad


def logreg_train(
    X: np.ndarray,
    y: np.ndarray,
    l2_lambda: float,
    max_iter: int = 2000,
    grad_tol: float = 1e-6,
    n_classes: int | None = None,
) -> LogRegModel:
    """Full-batch gradient descent with Armijo backtracking from zero init.

    Minimizes mean cross-entropy + (lambda/2)*||W_no_bias||^2 / n. Stops when
    the gradient infinity-norm drops below grad_tol, the line search can no
    longer make progress, or max_iter is reached. Deterministic.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValidationError("X must be 2-D with one label per row")
    if not np.all(np.isfinite(X)):
        raise ValidationError("training matrix contains non-finite values")
    if l2_lambda < 0:
        raise ValidationError("l2_lambda must be non-negative")
    present = np.unique(y)
    if present.size < 2:
        raise ValidationError("logreg_train needs at least 2 classes present")
    C = int(n_classes) if n_classes is not None else int(y.max()) + 1
    if y.min() < 0 or y.max() >= C:
        raise ValidationError("label out of range")
    n, p = X.shape
    Xb = _add_bias(X)
    onehot = np.zeros((n, C))
    onehot[np.arange(n), y] = 1.0

    W = np.zeros((C, p + 1))
    loss, grad = _logreg_loss_grad(W, Xb, onehot, l2_lambda)
    trace = [float(loss)]
    iterations = 0
    grad_norm = float(np.abs(grad).max())
    while iterations < max_iter and grad_norm >= grad_tol:
        g2 = float(np.sum(grad * grad))
        step = 1.0
        while True:
            candidate = W - step * grad
            cand_loss, _ = _logreg_loss_grad(candidate, Xb, onehot, l2_lambda, want_grad=False)
            if cand_loss <= loss - _ARMIJO_C * step * g2:
                break
            step *= 0.5
            if step < _MIN_STEP:
                candidate, cand_loss = None, None
                break
        if candidate is None:
            break  # no descent step possible at float precision
        W = candidate
        loss, grad = _logreg_loss_grad(W, Xb, onehot, l2_lambda)
        trace.append(float(loss))
        grad_norm = float(np.abs(grad).max())
        iterations += 1
    return LogRegModel(
        weights=W,
        l2_lambda=l2_lambda,
        iterations=iterations,
        final_loss=float(loss),
        final_grad_norm=grad_norm,
        loss_trace=tuple(trace),
    )


def logreg_predict_proba(model: LogRegModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValidationError(
            f"model expects {model.n_features} features, got shape {X.shape}"
        )
    return _softmax(_add_bias(X) @ model.weights.T)


def logreg_predict(model: LogRegModel, X: np.ndarray) -> np.ndarray:
    return np.argmax(logreg_predict_proba(model, X), axis=1)


class LogRegTrainer:
    """fit/predict adapter so the CV harness can train fresh models per fold."""

    def __init__(self, l2_lambda: float = 1.0, max_iter: int = 2000, grad_tol: float = 1e-6):
        self.l2_lambda = l2_lambda
        self.max_iter = max_iter
        self.grad_tol = grad_tol
        self.model: LogRegModel | None = None

    def fit(self, X, y, n_classes=None):
        self.model = logreg_train(
            X, y, self.l2_lambda, max_iter=self.max_iter, grad_tol=self.grad_tol, n_classes=n_classes
        )
        return self

    def predict(self, X):
        return logreg_predict(self.model, X)

    def predict_proba(self, X):
        return logreg_predict_proba(self.model, X)

    def describe(self) -> str:
        return f"logreg(lambda={self.l2_lambda:g})"


@dataclass(frozen=True)
class LdaModel:
    """Linear discriminant analysis with diagonal-trace shrinkage."""

    means: np.ndarray  # (C, p)
    priors: np.ndarray  # (C,)
    gamma: float
    coef: np.ndarray  # (C, p)   Sigma^-1 mu_c
    const: np.ndarray  # (C,)    -0.5 mu' Sigma^-1 mu + log prior

    def __post_init__(self):
        for name in ("means", "priors", "coef", "const"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype=np.float64)))

    def decision_values(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[1] != self.means.shape[1]:
            raise ValidationError(
                f"model expects {self.means.shape[1]} features, got {X.shape[1]}"
            )
        return X @ self.coef.T + self.const

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.decision_values(X), axis=1)


def lda_train(X: np.ndarray, y: np.ndarray, gamma: float = 0.1, n_classes: int | None = None) -> LdaModel:
    """Pooled-covariance LDA; shrinkage (1-g)*S + g*(tr(S)/p)*I keeps the
    covariance invertible in p ~ n regimes."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValidationError("X must be 2-D with one label per row")
    if not (0.0 <= gamma <= 1.0):
        raise ValidationError("gamma must be in [0, 1]")
    C = int(n_classes) if n_classes is not None else int(y.max()) + 1
    n, p = X.shape
    present, counts = np.unique(y, return_counts=True)
    if present.size < 2:
        raise ValidationError("lda_train needs at least 2 classes present")
    if counts.min() < 2:
        raise ValidationError("every present class needs >= 2 samples")

    means = np.zeros((C, p))
    priors = np.zeros(C)
    pooled = np.zeros((p, p))
    for c in present:
        sub = X[y == c]
        means[c] = sub.mean(axis=0)
        priors[c] = sub.shape[0] / n
        centered = sub - means[c]
        pooled += centered.T @ centered
    # MLE divisor keeps the model invariant under dataset duplication
    pooled /= n
    shrunk = (1.0 - gamma) * pooled + gamma * (np.trace(pooled) / p) * np.eye(p)
    try:
        chol = np.linalg.cholesky(shrunk)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("shrunk covariance is not positive definite") from exc
    coef = np.linalg.solve(chol.T, np.linalg.solve(chol, means.T)).T  # Sigma^-1 mu_c
    log_priors = np.where(priors > 0, np.log(np.maximum(priors, 1e-300)), -np.inf)
    const = -0.5 * np.sum(coef * means, axis=1) + log_priors
    return LdaModel(means=means, priors=priors, gamma=gamma, coef=coef, const=const)


class LdaTrainer:
    def __init__(self, gamma: float = 0.1):
        self.gamma = gamma
        self.model: LdaModel | None = None

    def fit(self, X, y, n_classes=None):
        self.model = lda_train(X, y, gamma=self.gamma, n_classes=n_classes)
        return self

    def predict(self, X):
        return self.model.predict(X)

    def describe(self) -> str:
        return f"lda(gamma={self.gamma:g})"


@dataclass(frozen=True)
class StackEnsemble:
    """Five logistic-regression bases stacked under a logistic meta-learner.

    The meta-learner is trained on out-of-fold base probabilities (5*C wide);
    the bases used at inference are refit on the full training data.
    """

    bases: tuple[LogRegModel, ...]
    base_lambdas: tuple[float, ...]
    meta: LogRegModel
    inner_folds: int
    seed: int
    n_classes: int

    def __post_init__(self):
        if len(self.bases) != len(self.base_lambdas):
            raise ValidationError("one lambda per base model required")
        if self.meta.n_features != len(self.bases) * self.n_classes:
            raise ValidationError("meta input width must be n_bases * n_classes")

    def meta_features(self, X: np.ndarray) -> np.ndarray:
        return np.hstack([logreg_predict_proba(b, X) for b in self.bases])

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return logreg_predict_proba(self.meta, self.meta_features(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)


def ensemble_train(
    X: np.ndarray,
    y: np.ndarray,
    lambdas: tuple[float, ...] = DEFAULT_ENSEMBLE_LAMBDAS,
    inner_folds: int = 5,
    seed: int = 0,
    meta_lambda: float = 1.0,
    n_classes: int | None = None,
) -> StackEnsemble:
    """Stacking: per-lambda out-of-fold probabilities feed the meta-learner."""
    from .evaluation import stratified_kfold  # local import to avoid a cycle

    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    C = int(n_classes) if n_classes is not None else int(y.max()) + 1
    n = X.shape[0]
    if n < 2 * inner_folds * C:
        raise ValidationError(
            f"stacking needs n >= 2*inner_folds*C = {2 * inner_folds * C}, got {n}"
        )
    plan = stratified_kfold(y, inner_folds, seed)
    blocks = []
    for lam in lambdas:
        oof = np.zeros((n, C))
        for fold in range(inner_folds):
            test = plan.assignments == fold
            train = ~test
            base = logreg_train(X[train], y[train], lam, n_classes=C)
            oof[test] = logreg_predict_proba(base, X[test])
        blocks.append(oof)
    meta_X = np.hstack(blocks)
    meta = logreg_train(meta_X, y, meta_lambda, n_classes=C)
    bases = tuple(logreg_train(X, y, lam, n_classes=C) for lam in lambdas)
    return StackEnsemble(
        bases=bases,
        base_lambdas=tuple(float(v) for v in lambdas),
        meta=meta,
        inner_folds=inner_folds,
        seed=seed,
        n_classes=C,
    )


def ensemble_predict(ensemble: StackEnsemble, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(labels, probabilities) from the stacked model."""
    probs = ensemble.predict_proba(X)
    return np.argmax(probs, axis=1), probs


class EnsembleTrainer:
    def __init__(self, lambdas=DEFAULT_ENSEMBLE_LAMBDAS, inner_folds: int = 5, seed: int = 0, meta_lambda: float = 1.0):
        self.lambdas = tuple(lambdas)
        self.inner_folds = inner_folds
        self.seed = seed
        self.meta_lambda = meta_lambda
        self.model: StackEnsemble | None = None

    def fit(self, X, y, n_classes=None):
        self.model = ensemble_train(
            X,
            y,
            lambdas=self.lambdas,
            inner_folds=self.inner_folds,
            seed=self.seed,
            meta_lambda=self.meta_lambda,
            n_classes=n_classes,
        )
        return self

    def predict(self, X):
        return self.model.predict(X)

    def predict_proba(self, X):
        return self.model.predict_proba(X)

    def describe(self) -> str:
        lams = ",".join(f"{v:g}" for v in self.lambdas)
        return f"stack5lr(lambdas={lams})"


@dataclass(frozen=True)
class TrainedPipeline:
    """Full-data-trained inference bundle: scaler -> column subset -> model."""

    scaler: Scaler | None
    selected_indices: np.ndarray | None
    model: LogRegModel | LdaModel | StackEnsemble

    def __post_init__(self):
        if self.selected_indices is not None:
            object.__setattr__(
                self, "selected_indices", _frozen(np.asarray(self.selected_indices, dtype=np.int64))
            )

    def transform(self, values: np.ndarray) -> np.ndarray:
        out = np.asarray(values, dtype=np.float64)
        if self.scaler is not None:
            out = self.scaler.transform(out)
        if self.selected_indices is not None:
            out = out[:, self.selected_indices]
        return out

    def predict(self, values: np.ndarray) -> np.ndarray:
        return self.model.predict(self.transform(values))


# -- EIM1 serialization ----------------------------------------------------------

_KIND_LOGREG = 1
_KIND_LDA = 2
_KIND_ENSEMBLE = 3
_KIND_PIPELINE = 4


def _write_logreg(w: Writer, m: LogRegModel) -> None:
    w.u32(m.n_classes)
    w.u32(m.n_features)
    w.f64(m.l2_lambda)
    w.u32(m.iterations)
    w.f64(m.final_loss)
    w.f64(m.final_grad_norm)
    w.array(m.weights, "f8")


def _read_logreg(r: Reader) -> LogRegModel:
    c, p = r.u32(), r.u32()
    lam = r.f64()
    iters = r.u32()
    loss = r.f64()
    gnorm = r.f64()
    weights = r.array("f8", c * (p + 1)).reshape(c, p + 1)
    return LogRegModel(
        weights=weights,
        l2_lambda=lam,
        iterations=iters,
        final_loss=loss,
        final_grad_norm=gnorm,
        loss_trace=(),
    )


def _write_model(w: Writer, model) -> None:
    if isinstance(model, LogRegModel):
        w.u8(_KIND_LOGREG)
        _write_logreg(w, model)
    elif isinstance(model, LdaModel):
        w.u8(_KIND_LDA)
        c, p = model.means.shape
        w.u32(c)
        w.u32(p)
        w.f64(model.gamma)
        w.array(model.means, "f8")
        w.array(model.priors, "f8")
        w.array(model.coef, "f8")
        w.array(model.const, "f8")
    elif isinstance(model, StackEnsemble):
        w.u8(_KIND_ENSEMBLE)
        w.u32(model.n_classes)
        w.u32(len(model.bases))
        w.u32(model.inner_folds)
        w.i64(model.seed)
        for lam in model.base_lambdas:
            w.f64(lam)
        for base in model.bases:
            _write_logreg(w, base)
        _write_logreg(w, model.meta)
    elif isinstance(model, TrainedPipeline):
        w.u8(_KIND_PIPELINE)
        if model.scaler is None:
            w.u8(0)
        else:
            w.u8(1)
            w.u32(model.scaler.mean.size)
            w.array(model.scaler.mean, "f8")
            w.array(model.scaler.std, "f8")
        if model.selected_indices is None:
            w.u8(0)
        else:
            w.u8(1)
            w.u32(model.selected_indices.size)
            w.array(model.selected_indices, "i8")
        _write_model(w, model.model)
    else:
        raise ValidationError(f"cannot serialize model of type {type(model).__name__}")


def _read_model(r: Reader):
    kind = r.u8()
    if kind == _KIND_LOGREG:
        return _read_logreg(r)
    if kind == _KIND_LDA:
        c, p = r.u32(), r.u32()
        gamma = r.f64()
        means = r.array("f8", c * p).reshape(c, p)
        priors = r.array("f8", c)
        coef = r.array("f8", c * p).reshape(c, p)
        const = r.array("f8", c)
        return LdaModel(means=means, priors=priors, gamma=gamma, coef=coef, const=const)
    if kind == _KIND_ENSEMBLE:
        c = r.u32()
        n_bases = r.u32()
        inner = r.u32()
        seed = r.i64()
        lambdas = tuple(r.f64() for _ in range(n_bases))
        bases = tuple(_read_logreg(r) for _ in range(n_bases))
        meta = _read_logreg(r)
        return StackEnsemble(
            bases=bases, base_lambdas=lambdas, meta=meta, inner_folds=inner, seed=seed, n_classes=c
        )
    if kind == _KIND_PIPELINE:
        scaler = None
        if r.u8():
            p = r.u32()
            scaler = Scaler(mean=r.array("f8", p), std=r.array("f8", p))
        indices = None
        if r.u8():
            k = r.u32()
            indices = r.array("i8", k)
        model = _read_model(r)
        return TrainedPipeline(scaler=scaler, selected_indices=indices, model=model)
    raise ValidationError(f"unknown EIM1 model kind {kind}")


def save_model(model, path) -> None:
    """Serialize any trained model (or pipeline bundle) as an EIM1 blob."""
    w = Writer()
    w.raw(EIM1_MAGIC)
    w.u32(EIM1_VERSION)
    _write_model(w, model)
    with open(path, "wb") as fh:
        fh.write(w.getvalue())


def load_model(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    r = Reader(buf, str(path))
    if r.take(4) != EIM1_MAGIC:
        raise ValidationError(f"{path}: bad magic (not an EIM1 file)")
    version = r.u32()
    if version != EIM1_VERSION:
        raise ValidationError(f"{path}: unsupported EIM1 version {version}")
    model = _read_model(r)
    r.expect_end()
    return model
