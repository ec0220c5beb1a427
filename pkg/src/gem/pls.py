"""PLS regression and PLS-DA on ER matrices.

Single-response PLS (NIPALS, orthogonal scores).  Multi-class targets are
fitted one one-vs-rest column at a time and fused by argmax.  Around the
fit: cross-validated prediction/classification, Martens-style jackknife
p-values, sMC variable importance and shaving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.linalg import solve_triangular

from .dataset import Variable
from .validation import as_scheme, map_ordered, one_se_index, segments

TWO_CLASS = "two-class"
MULTI_CLASS = "multi-class"
CONTINUOUS = "continuous"


@dataclass(frozen=True)
class TargetCoding:
    kind: str
    dummy: np.ndarray
    levels: tuple[str, ...] = ()
    labels: np.ndarray | None = None
    values: np.ndarray | None = None

    @property
    def is_categorical(self) -> bool:
        return self.kind != CONTINUOUS

    @property
    def n(self) -> int:
        return self.dummy.shape[0]

    def subset(self, rows) -> "TargetCoding":
        return TargetCoding(
            self.kind,
            self.dummy[rows],
            self.levels,
            None if self.labels is None else self.labels[rows],
            None if self.values is None else self.values[rows],
        )


def encode_target(variable, levels=None) -> TargetCoding:
    """Code a design variable as a PLS/elastic-net target.

    Two classes give one +-1 column (first sorted level is -1); more
    classes give one +1/-1 membership column per class; continuous values
    are centered.
    """
    if isinstance(variable, TargetCoding):
        return variable
    if isinstance(variable, Variable):
        if variable.spec.is_categorical:
            levels = variable.spec.levels if levels is None else levels
            labels = np.asarray(variable.values, dtype=str)
        else:
            y = np.asarray(variable.values, dtype=float)
            return TargetCoding(CONTINUOUS, (y - y.mean())[:, None], values=y)
    else:
        arr = np.asarray(variable)
        if arr.dtype.kind in "fiu" and levels is None:
            y = arr.astype(float)
            return TargetCoding(CONTINUOUS, (y - y.mean())[:, None], values=y)
        labels = arr.astype(str)
        if levels is None:
            levels = sorted(set(labels.tolist()))
    levels = tuple(str(v) for v in levels)
    present = [lev for lev in levels if np.any(labels == lev)]
    if len(present) < 2:
        raise ValueError("target needs at least two observed classes")
    if len(levels) == 2:
        dummy = np.where(labels == levels[1], 1.0, -1.0)[:, None]
        return TargetCoding(TWO_CLASS, dummy, levels, labels)
    dummy = np.column_stack([np.where(labels == lev, 1.0, -1.0) for lev in levels])
    return TargetCoding(MULTI_CLASS, dummy, levels, labels)


@dataclass(frozen=True)
class PlsModel:
    """Single-response PLS model; ``B[a-1]`` is the regression vector with ``a`` components."""

    center_X: np.ndarray
    center_y: float
    T: np.ndarray
    W: np.ndarray
    P: np.ndarray
    q: np.ndarray
    B: np.ndarray
    explvar_X: np.ndarray
    explvar_y: np.ndarray

    @property
    def ncomp(self) -> int:
        return self.W.shape[1]

    def predict(self, Xnew, a: int | None = None) -> np.ndarray:
        return predict(self, Xnew, a)


@dataclass(frozen=True)
class MultiPlsModel:
    """One PLS model per one-vs-rest target column."""

    models: tuple[PlsModel, ...]

    @property
    def ncomp(self) -> int:
        return self.models[0].ncomp

    @property
    def T(self):
        return self.models[0].T

    @property
    def W(self):
        return self.models[0].W

    @property
    def P(self):
        return self.models[0].P

    @property
    def explvar_X(self):
        return self.models[0].explvar_X

    @property
    def B(self) -> np.ndarray:
        return np.stack([m.B for m in self.models], axis=-1)

    def predict(self, Xnew, a: int | None = None) -> np.ndarray:
        return predict(self, Xnew, a)


def _pls1(X: np.ndarray, y: np.ndarray, A: int) -> PlsModel:
    n, N = X.shape
    cx = X.mean(axis=0)
    cy = float(y.mean())
    Xa = X - cx
    yc = y - cy
    ssx = float(np.sum(Xa**2))
    ssy = float(yc @ yc)
    if ssy == 0:
        raise ValueError("target has zero variance")
    W = np.zeros((N, A))
    P = np.zeros((N, A))
    T = np.zeros((n, A))
    q = np.zeros(A)
    tol = 1e-10 * math.sqrt(ssx * ssy)
    k = 0
    for a in range(A):
        w = Xa.T @ yc
        nw = np.linalg.norm(w)
        if nw <= tol:
            break
        w /= nw
        t = Xa @ w
        tt = float(t @ t)
        p = Xa.T @ t / tt
        W[:, a], P[:, a], T[:, a] = w, p, t
        q[a] = float(yc @ t) / tt
        Xa = Xa - np.outer(t, p)
        k = a + 1
    Wstar = np.zeros((N, A))
    if k:
        Wstar[:, :k] = solve_triangular(np.triu(P[:, :k].T @ W[:, :k]), W[:, :k].T, trans=1).T
    B = np.cumsum(Wstar * q, axis=1).T
    tss = np.sum(T**2, axis=0)
    explvar_X = tss * np.sum(P**2, axis=0) / ssx if ssx > 0 else np.zeros(A)
    explvar_y = q**2 * tss / ssy
    return PlsModel(cx, cy, T, W, P, q, B, explvar_X, explvar_y)


def _target_matrix(target):
    if isinstance(target, (TargetCoding, Variable)):
        return encode_target(target).dummy
    y = np.asarray(target)
    if y.dtype.kind not in "fiub":
        return encode_target(y).dummy
    y = y.astype(float)
    return y[:, None] if y.ndim == 1 else y


def fit_pls(ER, target, A: int):
    """Fit ``A`` components of ``target ~ ER``.

    Returns a :class:`PlsModel` for a one-column target and a
    :class:`MultiPlsModel` for a multi-class coding.
    """
    X = np.asarray(ER, dtype=float)
    Y = _target_matrix(target)
    n, N = X.shape
    if Y.shape[0] != n:
        raise ValueError(f"target has {Y.shape[0]} rows, ER has {n}")
    if not 1 <= A <= min(n - 1, N):
        raise ValueError(f"A must be in 1..{min(n - 1, N)}, got {A}")
    models = tuple(_pls1(X, Y[:, j], A) for j in range(Y.shape[1]))
    return models[0] if len(models) == 1 else MultiPlsModel(models)


def predict(model, Xnew, a: int | None = None) -> np.ndarray:
    if isinstance(model, MultiPlsModel):
        return np.column_stack([predict(m, Xnew, a) for m in model.models])
    a = model.ncomp if a is None else a
    if not 0 <= a <= model.ncomp:
        raise ValueError(f"a must be in 0..{model.ncomp}")
    Xnew = np.atleast_2d(np.asarray(Xnew, dtype=float))
    if Xnew.shape[1] != model.center_X.shape[0]:
        raise ValueError(f"Xnew has {Xnew.shape[1]} columns, model has {model.center_X.shape[0]}")
    if a == 0:
        return np.full(Xnew.shape[0], model.center_y)
    return model.center_y + (Xnew - model.center_X) @ model.B[a - 1]


def classify(pred, coding: TargetCoding) -> np.ndarray:
    """Sign rule for two classes (0 goes to the first level), argmax otherwise."""
    if not coding.is_categorical:
        raise ValueError("classify needs a categorical target coding")
    pred = np.asarray(pred, dtype=float)
    levels = np.array(coding.levels)
    if coding.kind == TWO_CLASS:
        return np.where(pred > 0, levels[1], levels[0])
    return levels[np.argmax(pred, axis=-1)]


def majority_class_error(target) -> float:
    if isinstance(target, TargetCoding):
        labels = target.labels
    elif isinstance(target, Variable):
        labels = target.values
    else:
        labels = np.asarray(target)
    _, counts = np.unique(np.asarray(labels).astype(str), return_counts=True)
    return 1.0 - counts.max() / counts.sum()


@dataclass(frozen=True)
class CvResult:
    scheme: str
    pred: np.ndarray
    classes: np.ndarray | None
    error: np.ndarray
    se: np.ndarray
    ncomp_selected: int
    segments: tuple = ()
    segment_coefs: np.ndarray | None = field(default=None, repr=False)


def _coefs(model) -> np.ndarray:
    """Regression vectors as (A, N, c)."""
    if isinstance(model, MultiPlsModel):
        return model.B
    return model.B[:, :, None]


def cross_validate(ER, target, A: int, scheme="loo") -> CvResult:
    """Out-of-segment predictions for 1..A components.

    Every segment refits centering and PLS on the remaining samples.  Error
    is the misclassification fraction for categorical targets and RMSE for
    continuous ones; ``ncomp_selected`` follows the one-standard-error rule.
    """
    X = np.asarray(ER, dtype=float)
    coding = encode_target(target) if not isinstance(target, TargetCoding) else target
    Y = coding.dummy
    n, N = X.shape
    scheme = as_scheme(scheme)
    segs = segments(n, scheme, coding.labels if coding.is_categorical else None)
    if not 1 <= A <= min(n - max(len(s) for s in segs) - 1, N):
        raise ValueError(f"A = {A} is too large for the training segments")

    def run(test):
        train = np.setdiff1d(np.arange(n), test)
        model = fit_pls(X[train], Y[train], A)
        preds = np.stack([np.atleast_2d(predict(model, X[test], a)).reshape(len(test), -1)
                          for a in range(1, A + 1)], axis=1)
        return preds, _coefs(model)

    results = map_ordered(run, segs)
    c = Y.shape[1]
    pred = np.empty((n, A, c))
    for test, (p, _) in zip(segs, results):
        pred[test] = p
    seg_coefs = np.stack([b for _, b in results])

    if coding.is_categorical:
        classes = classify(pred if c > 1 else pred[..., 0], coding)
        loss = (classes != coding.labels[:, None]).astype(float)
        error = loss.mean(axis=0)
        se = loss.std(axis=0, ddof=1) / math.sqrt(n)
    else:
        classes = None
        sq = (pred[..., 0] - Y[:, :1]) ** 2
        mse = sq.mean(axis=0)
        error = np.sqrt(mse)
        se_mse = sq.std(axis=0, ddof=1) / math.sqrt(n)
        with np.errstate(divide="ignore", invalid="ignore"):
            se = np.where(error > 0, se_mse / (2 * error), 0.0)
    ncomp = one_se_index(error, se) + 1
    return CvResult(
        scheme=str(scheme),
        pred=pred[..., 0] if c == 1 else pred,
        classes=classes,
        error=error,
        se=se,
        ncomp_selected=ncomp,
        segments=tuple(segs),
        segment_coefs=seg_coefs,
    )


def jackknife_pvalues(b_full: np.ndarray, b_segments: np.ndarray) -> np.ndarray:
    """Two-sided t-test of each coefficient against its spread over M segments.

    ``s^2 = (M-1)/M * sum_m (b_m - b_full)^2``, ``t = b_full / s`` on M-1
    degrees of freedom.  ``b = s = 0`` gives p = 1.
    """
    M = b_segments.shape[0]
    if M < 3:
        raise ValueError(f"jackknife needs at least 3 segments, got {M}")
    s2 = (M - 1) / M * np.sum((b_segments - b_full) ** 2, axis=0)
    s = np.sqrt(s2)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(s > 0, b_full / np.where(s > 0, s, 1.0), np.where(b_full == 0, 0.0, np.inf))
    return np.clip(2.0 * stats.t.sf(np.abs(t), M - 1), 0.0, 1.0)


def jackknife(ER, target, A: int, scheme="loo", cv: CvResult | None = None) -> np.ndarray:
    """Jackknife p-values, shape (N, A); (N, A, c) for multi-class targets.

    PLS1 regression vectors do not depend on component signs, so segment
    coefficients are compared with the full-data ones directly.
    """
    X = np.asarray(ER, dtype=float)
    coding = encode_target(target) if not isinstance(target, TargetCoding) else target
    if cv is None:
        cv = cross_validate(X, coding, A, scheme)
    full = _coefs(fit_pls(X, coding.dummy, A))
    p = jackknife_pvalues(full, cv.segment_coefs)
    p = np.transpose(p, (1, 0, 2))
    return p[..., 0] if p.shape[-1] == 1 else p


def smc_importance(model, ER, a: int | None = None) -> np.ndarray:
    """F-like sMC statistic per variable.

    Each centered column is regressed on the projection of the data onto
    the normalized regression vector with ``a`` components; the statistic
    is ``SSR / (SSE / (n - 2))``.  Multi-class models take the maximum over
    their one-vs-rest columns.
    """
    if isinstance(model, MultiPlsModel):
        return np.max([smc_importance(m, ER, a) for m in model.models], axis=0)
    a = model.ncomp if a is None else a
    if not 1 <= a <= model.ncomp:
        raise ValueError(f"a must be in 1..{model.ncomp}")
    X = np.asarray(ER, dtype=float)
    b = model.B[a - 1]
    nb = np.linalg.norm(b)
    if nb == 0:
        raise ValueError("regression vector is zero")
    Xc = X - model.center_X
    t = Xc @ (b / nb)
    tt = float(t @ t)
    if tt == 0:
        return np.zeros(X.shape[1])
    ssr = (t @ Xc) ** 2 / tt
    sse = np.maximum(np.sum(Xc**2, axis=0) - ssr, 0.0)
    dof = max(X.shape[0] - 2, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        F = np.where(sse > 0, ssr / (sse / dof), np.where(ssr > 0, np.inf, 0.0))
    return F


@dataclass(frozen=True)
class ShaveStep:
    variables: tuple[int, ...]
    error: float


@dataclass(frozen=True)
class ShaveResult:
    trace: tuple[ShaveStep, ...]
    min_red: int
    ncomp: int

    @property
    def optimal_subset(self) -> tuple[int, ...]:
        return self.trace[self.min_red].variables

    @property
    def n_active(self) -> list[int]:
        return [len(s.variables) for s in self.trace]

    @property
    def errors(self) -> np.ndarray:
        return np.array([s.error for s in self.trace])


def shave(ER, target, A: int, fraction: float = 0.2, scheme="loo") -> ShaveResult:
    """Repeated sMC elimination.

    Each step cross-validates the active variables, records the error at
    ``A`` components, then drops the ``ceil(fraction * active)`` (at least 1)
    least important ones, until ``max(A + 1, 2)`` variables remain.
    ``min_red`` is the first step reaching the minimal error.
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must be in (0, 1)")
    X = np.asarray(ER, dtype=float)
    coding = encode_target(target) if not isinstance(target, TargetCoding) else target
    stop = max(A + 1, 2)
    if X.shape[1] < stop:
        raise ValueError(f"need at least {stop} variables to shave")
    active = np.arange(X.shape[1])
    trace = []
    while True:
        cv = cross_validate(X[:, active], coding, A, scheme)
        trace.append(ShaveStep(tuple(int(i) for i in active), float(cv.error[A - 1])))
        if len(active) <= stop:
            break
        model = fit_pls(X[:, active], coding.dummy, A)
        imp = smc_importance(model, X[:, active], A)
        drop = min(max(1, math.ceil(fraction * len(active))), len(active) - stop)
        keep = np.sort(np.argsort(imp, kind="stable")[drop:])
        active = active[keep]
    errors = np.array([s.error for s in trace])
    min_red = int(np.flatnonzero(errors == errors.min())[0])
    return ShaveResult(tuple(trace), min_red, A)
