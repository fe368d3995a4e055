"""Residue-classification probes: recover n mod T from the embedding of n.

Three probe families are provided as scikit-learn style estimators:

* :class:`LogisticProbe`: multinomial logistic regression fit by a
  full-batch quasi-Newton optimizer (convex, deterministic);
* :class:`MLPProbe`: one hidden ReLU layer trained by mini-batch gradient
  descent on the cross-entropy;
* :class:`CircularProbe`: a linear map to the plane read out against fixed
  unit anchors at angles 2*pi*k/m through a temperature-scaled cosine.

The evaluation protocol is seeded, stratified cross-validation: ``n_seeds``
independent fold assignments, ``n_folds`` folds each, one accuracy per
(seed, fold) run, aggregated by the plain mean.  Chance-corrected quality is
reported as Cohen's kappa in percent.  Per-class fold shuffles are seeded by
(seed, smallest index of the class), so relabeling the classes by any fixed
permutation leaves the folds, and hence the linear probe's accuracy, exactly
unchanged.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_X_y

from .exceptions import FoldError, ModspecError, ValidationError
from .validation import as_matrix

KINDS = ("linear", "mlp", "circular")


def cohen_kappa(accuracy: float, period: int) -> float:
    """Chance-corrected accuracy in percent: 100*(acc - 1/T)/(1 - 1/T)."""
    if period < 2:
        raise ValidationError(f"period must be at least 2, got {period}")
    chance = 1.0 / period
    return 100.0 * (accuracy - chance) / (1.0 - chance)


@dataclass(frozen=True)
class ProbeConfig:
    """Hyperparameters for one probe cell.

    ``seeds`` overrides ``n_seeds`` when given.  ``learning_rate``,
    ``epochs`` and ``batch_size`` drive the MLP; ``circular_epochs``,
    ``anchor_count`` and ``temperature`` drive the circular probe (anchors
    default to one per residue class); ``max_iter``/``tol`` bound the
    quasi-Newton linear fit.  ``l2`` applies to the linear and MLP weights.
    """

    kind: str = "linear"
    period: int = 10
    n_seeds: int = 3
    n_folds: int = 10
    standardize: bool = True
    learning_rate: float = 0.05
    max_iter: int = 500
    l2: float = 1e-4
    tol: float = 1e-7
    hidden_width: int = 64
    epochs: int = 200
    batch_size: int = 32
    anchor_count: int | None = None
    temperature: float = 0.1
    circular_epochs: int = 300
    seeds: tuple | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown probe kind {self.kind!r}; use {KINDS}")
        if self.period < 2:
            raise ValidationError(f"period must be at least 2, got {self.period}")
        if self.n_folds < 2:
            raise ValidationError("n_folds must be at least 2")
        if self.seeds is None and self.n_seeds < 1:
            raise ValidationError("n_seeds must be at least 1")
        if self.seeds is not None:
            seeds = tuple(int(s) for s in self.seeds)
            if not seeds or any(s < 0 for s in seeds):
                raise ValidationError("seeds must be a non-empty tuple of ints >= 0")
            object.__setattr__(self, "seeds", seeds)

    def resolved_seeds(self) -> tuple:
        return self.seeds if self.seeds is not None else tuple(range(self.n_seeds))


@dataclass(frozen=True)
class ProbeRun:
    seed: int
    fold: int
    accuracy: float
    note: str = ""


@dataclass(frozen=True)
class ProbeResult:
    """Aggregate of all (seed, fold) runs for one (period, kind) cell."""

    kind: str
    period: int
    per_run: tuple
    accuracy: float
    kappa: float
    config: ProbeConfig
    warnings: tuple = ()


def stratified_fold_assignment(labels, n_folds: int, seed: int) -> np.ndarray:
    """Deterministic stratified fold ids, one per row.

    Each class's indices are shuffled by a generator seeded from
    ``(seed, smallest index of the class)`` and dealt round-robin.  The
    assignment therefore depends only on the index sets, not on how the
    classes are numbered.  Every class needs at least 2 members; round-robin
    dealing then spreads it over at least 2 folds, so no training split can
    lose a class.  The largest class must have at least ``n_folds`` members,
    otherwise some fold would receive no row at all.
    """
    labels = np.asarray(labels)
    if n_folds < 2:
        raise FoldError(f"n_folds must be at least 2, got {n_folds}")
    if seed < 0:
        raise FoldError(f"seed must be non-negative, got {seed}")
    largest = int(np.bincount(np.unique(labels, return_inverse=True)[1]).max())
    if largest < n_folds:
        raise FoldError(
            f"largest class has {largest} member(s); at least {n_folds} are "
            f"needed so no test fold is left empty"
        )
    fold_of = np.empty(labels.shape[0], dtype=np.int64)
    for value in np.unique(labels):
        idx = np.flatnonzero(labels == value)
        if idx.shape[0] < 2:
            raise FoldError(
                f"class {value} has {idx.shape[0]} member(s); at least 2 are "
                f"needed so every training split keeps the class"
            )
        rng = np.random.default_rng(
            np.random.SeedSequence((int(seed), int(idx[0])))
        )
        shuffled = rng.permutation(idx)
        fold_of[shuffled] = np.arange(idx.shape[0]) % n_folds
    return fold_of


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


class LogisticProbe(ClassifierMixin, BaseEstimator):
    """Multinomial logistic regression with a quasi-Newton full-batch fit.

    Minimizes the mean cross-entropy plus an L2 penalty on the weights (the
    intercept is not penalized).  The problem is convex, so the fit starts
    from zero and needs no random state.  Non-convergence within
    ``max_iter`` iterations is recorded, not raised: ``converged_`` is False
    and ``grad_norm_`` holds the final projected-gradient infinity norm.
    """

    def __init__(self, l2: float = 1e-4, max_iter: int = 500, tol: float = 1e-7):
        self.l2 = l2
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        n_classes = self.classes_.shape[0]
        if n_classes < 2:
            raise ValidationError("need at least 2 classes")
        n, d = X.shape
        ones = np.hstack([X, np.ones((n, 1))])
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), y_idx] = 1.0
        l2 = self.l2

        def objective(flat):
            w = flat.reshape(n_classes, d + 1)
            logits = ones @ w.T
            shifted = logits - logits.max(axis=1, keepdims=True)
            log_norm = np.log(np.exp(shifted).sum(axis=1))
            log_probs = shifted - log_norm[:, None]
            loss = -log_probs[np.arange(n), y_idx].mean()
            loss += 0.5 * l2 * float((w[:, :d] ** 2).sum())
            probs = np.exp(log_probs)
            grad = (probs - onehot).T @ ones / n
            grad[:, :d] += l2 * w[:, :d]
            return loss, grad.ravel()

        result = minimize(
            objective,
            np.zeros(n_classes * (d + 1)),
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": self.max_iter, "gtol": self.tol, "ftol": 1e-15},
        )
        weights = result.x.reshape(n_classes, d + 1)
        self.coef_ = weights[:, :d]
        self.intercept_ = weights[:, d]
        self.n_iter_ = int(result.nit)
        self.grad_norm_ = float(np.abs(result.jac).max())
        self.converged_ = bool(self.grad_norm_ <= self.tol or result.success)
        self.n_features_in_ = d
        return self

    def decision_function(self, X):
        if not hasattr(self, "coef_"):
            raise NotFittedError("LogisticProbe is not fitted")
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_.T + self.intercept_

    def predict_proba(self, X):
        return _softmax(self.decision_function(X))

    def predict(self, X):
        # argmax takes the first maximum, i.e. ties go to the lowest class.
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=1)]


class MLPProbe(ClassifierMixin, BaseEstimator):
    """One-hidden-layer ReLU classifier trained by mini-batch gradient descent."""

    def __init__(
        self,
        hidden_width: int = 64,
        epochs: int = 200,
        batch_size: int = 32,
        learning_rate: float = 0.05,
        l2: float = 1e-4,
        random_state: int = 0,
    ):
        self.hidden_width = hidden_width
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.l2 = l2
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        n_classes = self.classes_.shape[0]
        if n_classes < 2:
            raise ValidationError("need at least 2 classes")
        n, d = X.shape
        h = int(self.hidden_width)
        rng = np.random.default_rng(self.random_state)
        w1 = rng.normal(0.0, np.sqrt(2.0 / d), size=(d, h))
        b1 = np.zeros(h)
        # Zero output weights keep the training trajectory exactly
        # equivariant under any relabeling of the classes.
        w2 = np.zeros((h, n_classes))
        b2 = np.zeros(n_classes)
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), y_idx] = 1.0
        lr, l2 = self.learning_rate, self.l2
        batch = max(1, int(self.batch_size))
        for _ in range(int(self.epochs)):
            order = rng.permutation(n)
            for start in range(0, n, batch):
                take = order[start : start + batch]
                xb, yb = X[take], onehot[take]
                hidden = np.maximum(xb @ w1 + b1, 0.0)
                probs = _softmax(hidden @ w2 + b2)
                delta = (probs - yb) / take.shape[0]
                grad_w2 = hidden.T @ delta + l2 * w2
                grad_b2 = delta.sum(axis=0)
                back = (delta @ w2.T) * (hidden > 0.0)
                grad_w1 = xb.T @ back + l2 * w1
                grad_b1 = back.sum(axis=0)
                w2 -= lr * grad_w2
                b2 -= lr * grad_b2
                w1 -= lr * grad_w1
                b1 -= lr * grad_b1
        self.coefs_ = (w1, w2)
        self.intercepts_ = (b1, b2)
        self.n_features_in_ = d
        return self

    def decision_function(self, X):
        if not hasattr(self, "coefs_"):
            raise NotFittedError("MLPProbe is not fitted")
        X = check_array(X, dtype=np.float64)
        w1, w2 = self.coefs_
        b1, b2 = self.intercepts_
        return np.maximum(X @ w1 + b1, 0.0) @ w2 + b2

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=1)]


class CircularProbe(ClassifierMixin, BaseEstimator):
    """Linear projection to the plane read out against fixed unit anchors.

    Scores class k by the cosine similarity between the projected point
    W^T x and the anchor at angle 2*pi*k/m, divided by ``temperature``; W is
    trained by full-batch gradient descent on the cross-entropy of the
    softmax over those scores.  ``anchor_count=None`` uses one anchor per
    class.  Rows whose projection has near-zero norm are counted in
    ``degenerate_count_`` (their readout direction is meaningless).
    """

    _NORM_FLOOR = 1e-12
    _DEGENERATE = 1e-8

    def __init__(
        self,
        anchor_count: int | None = None,
        temperature: float = 0.1,
        epochs: int = 300,
        learning_rate: float = 0.05,
        random_state: int = 0,
    ):
        self.anchor_count = anchor_count
        self.temperature = temperature
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.random_state = random_state

    def _anchor_matrix(self) -> np.ndarray:
        angles = self.anchors_
        return np.stack([np.cos(angles), np.sin(angles)], axis=1)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        n_classes = self.classes_.shape[0]
        if n_classes < 2:
            raise ValidationError("need at least 2 classes")
        m = n_classes if self.anchor_count is None else int(self.anchor_count)
        if m < n_classes:
            raise ValidationError(
                f"anchor_count={m} is fewer than the {n_classes} classes"
            )
        if self.temperature <= 0.0:
            raise ValidationError("temperature must be positive")
        n, d = X.shape
        self.anchors_ = 2.0 * np.pi * np.arange(m) / m
        anchors = self._anchor_matrix()
        rng = np.random.default_rng(self.random_state)
        w = rng.normal(0.0, np.sqrt(1.0 / d), size=(d, 2))
        onehot = np.zeros((n, m))
        onehot[np.arange(n), y_idx] = 1.0
        lr, tau = self.learning_rate, self.temperature
        for _ in range(int(self.epochs)):
            z = X @ w
            radius = np.maximum(
                np.sqrt((z * z).sum(axis=1)), self._NORM_FLOOR
            )
            unit = z / radius[:, None]
            cosines = unit @ anchors.T
            probs = _softmax(cosines / tau)
            delta = (probs - onehot) / n
            # d(cos_k)/dz = (a_k - u (u . a_k)) / r, chained through 1/tau
            pull = delta @ anchors
            along = (delta * cosines).sum(axis=1)
            grad_z = (pull - unit * along[:, None]) / (radius[:, None] * tau)
            w -= lr * (X.T @ grad_z)
        self.projection_ = w
        radii = np.sqrt(((X @ w) ** 2).sum(axis=1))
        self.degenerate_count_ = int((radii < self._DEGENERATE).sum())
        self.n_features_in_ = d
        return self

    def project(self, X) -> np.ndarray:
        """Normalized 2-D projections of the rows (for plotting)."""
        if not hasattr(self, "projection_"):
            raise NotFittedError("CircularProbe is not fitted")
        X = check_array(X, dtype=np.float64)
        z = X @ self.projection_
        radius = np.maximum(np.sqrt((z * z).sum(axis=1)), self._NORM_FLOOR)
        return z / radius[:, None]

    def decision_function(self, X):
        return (self.project(X) @ self._anchor_matrix().T) / self.temperature

    def predict(self, X):
        scores = self.decision_function(X)[:, : self.classes_.shape[0]]
        return self.classes_[np.argmax(scores, axis=1)]


def _coerce_config(config, kind: str, overrides: dict) -> ProbeConfig:
    if config is None:
        config = ProbeConfig(kind=kind, **overrides)
    else:
        config = dataclasses.replace(config, kind=kind, **overrides)
    return config


def _run_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence((int(seed), int(fold))).generate_state(1)[0])


def _make_estimator(config: ProbeConfig, run_seed: int):
    if config.kind == "linear":
        return LogisticProbe(l2=config.l2, max_iter=config.max_iter, tol=config.tol)
    if config.kind == "mlp":
        return MLPProbe(
            hidden_width=config.hidden_width,
            epochs=config.epochs,
            batch_size=config.batch_size,
            learning_rate=config.learning_rate,
            l2=config.l2,
            random_state=run_seed,
        )
    return CircularProbe(
        anchor_count=config.anchor_count or config.period,
        temperature=config.temperature,
        epochs=config.circular_epochs,
        learning_rate=config.learning_rate,
        random_state=run_seed,
    )


def _standardize_pair(train: np.ndarray, test: np.ndarray) -> tuple:
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    std = np.where(std > 0.0, std, 1.0)
    return (train - mean) / std, (test - mean) / std


def run_probe(x, config: ProbeConfig) -> ProbeResult:
    """Cross-validated accuracy of one probe cell on a table.

    Labels are the index residues n mod period.  Runs exactly
    ``len(seeds) * n_folds`` fits; folds are stratified per class and every
    index lands in the test fold exactly once per seed.
    """
    values = as_matrix(x)
    n = values.shape[0]
    period = config.period
    if n < 2 * period:
        raise ValidationError(
            f"need at least {2 * period} rows for period {period}, got {n}"
        )
    labels = np.arange(n) % period
    runs = []
    warnings = []
    for seed in config.resolved_seeds():
        fold_of = stratified_fold_assignment(labels, config.n_folds, seed)
        for fold in range(config.n_folds):
            test_mask = fold_of == fold
            train_mask = ~test_mask
            y_train, y_test = labels[train_mask], labels[test_mask]
            if np.unique(y_train).shape[0] != period:
                raise FoldError(
                    f"training split of fold {fold} lost a residue class"
                )
            x_train, x_test = values[train_mask], values[test_mask]
            if config.standardize:
                x_train, x_test = _standardize_pair(x_train, x_test)
            estimator = _make_estimator(config, _run_seed(seed, fold))
            estimator.fit(x_train, y_train)
            accuracy = float((estimator.predict(x_test) == y_test).mean())
            note = ""
            if isinstance(estimator, LogisticProbe) and not estimator.converged_:
                note = (
                    f"not converged: grad_norm={estimator.grad_norm_:.3e} "
                    f"after {estimator.n_iter_} iterations"
                )
                warnings.append(f"seed {seed} fold {fold}: {note}")
            runs.append(ProbeRun(seed=int(seed), fold=fold, accuracy=accuracy, note=note))
    accuracy = float(np.mean([run.accuracy for run in runs]))
    return ProbeResult(
        kind=config.kind,
        period=period,
        per_run=tuple(runs),
        accuracy=accuracy,
        kappa=cohen_kappa(accuracy, period),
        config=config,
        warnings=tuple(warnings),
    )


def linear_probe(x, config: ProbeConfig | None = None, **overrides) -> ProbeResult:
    return run_probe(x, _coerce_config(config, "linear", overrides))


def mlp_probe(x, config: ProbeConfig | None = None, **overrides) -> ProbeResult:
    return run_probe(x, _coerce_config(config, "mlp", overrides))


@dataclass(frozen=True, eq=False)
class CircularProbeReport:
    """Cross-validated result plus a full-data refit for plotting."""

    result: ProbeResult
    probe: CircularProbe
    projections: np.ndarray
    degenerate_count: int


def circular_probe(
    x, config: ProbeConfig | None = None, **overrides
) -> CircularProbeReport:
    """Circular probe protocol: CV result plus the refit projection map."""
    config = _coerce_config(config, "circular", overrides)
    result = run_probe(x, config)
    values = as_matrix(x)
    labels = np.arange(values.shape[0]) % config.period
    if config.standardize:
        values, _ = _standardize_pair(values, values)
    refit_seed = _run_seed(config.resolved_seeds()[0], config.n_folds)
    probe = _make_estimator(config, refit_seed)
    probe.fit(values, labels)
    projections = probe.project(values)
    projections.setflags(write=False)
    return CircularProbeReport(
        result=result,
        probe=probe,
        projections=projections,
        degenerate_count=probe.degenerate_count_,
    )


@dataclass(frozen=True)
class SweepCell:
    period: int
    kind: str
    result: ProbeResult | None
    error: str = ""


@dataclass(frozen=True)
class SweepResult:
    """Grid of probe cells; failed cells carry an error string instead."""

    cells: tuple

    @property
    def errors(self) -> tuple:
        return tuple(
            (cell.period, cell.kind, cell.error) for cell in self.cells if cell.error
        )

    def get(self, period: int, kind: str) -> ProbeResult:
        for cell in self.cells:
            if cell.period == period and cell.kind == kind:
                if cell.result is None:
                    raise KeyError(
                        f"cell ({period}, {kind}) failed: {cell.error}"
                    )
                return cell.result
        raise KeyError(f"no cell ({period}, {kind}) in this sweep")


def probe_sweep(x, periods, kinds=("linear",), config: ProbeConfig | None = None) -> SweepResult:
    """Run every (period, kind) cell, collecting per-cell errors."""
    cells = []
    for period in periods:
        for kind in kinds:
            try:
                cell_config = _coerce_config(config, kind, {"period": int(period)})
                result = run_probe(x, cell_config)
                cells.append(SweepCell(int(period), kind, result))
            except ModspecError as exc:
                cells.append(
                    SweepCell(
                        int(period), kind, None, f"{type(exc).__name__}: {exc}"
                    )
                )
    return SweepResult(cells=tuple(cells))
