"""Elastic-net regression and binomial classification by coordinate descent.

Objective on standardized columns (mean 0, 1/n variance)::

    gaussian:  1/(2n) ||y - b0 - X b||^2          + lam * pen(b)
    binomial:  -1/n  sum loglik(y | b0 + X b)      + lam * pen(b)
    pen(b) = alpha ||b||_1 + (1 - alpha)/2 ||b||^2

Coefficients are reported on the original column scale.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numba
import numpy as np

from .dataset import Variable
from .validation import as_scheme, map_ordered, one_se_index, segments

GAUSSIAN = "gaussian"
BINOMIAL = "binomial"
ALPHA_FLOOR = 1e-3
MAX_ITER = 100_000
MAX_OUTER = 200
W_FLOOR = 1e-5


@numba.njit(cache=True, nogil=True)
def _soft(z, g):
    if z > g:
        return z - g
    if z < -g:
        return z + g
    return 0.0


@numba.njit(cache=True, nogil=True)
def _cd_gaussian(X, r, b, lam, alpha, tol, max_iter):
    # r is the current residual and is updated in place
    n, p = X.shape
    l1 = lam * alpha
    denom = 1.0 + lam * (1.0 - alpha)
    for it in range(max_iter):
        dmax = 0.0
        for j in range(p):
            xj = X[:, j]
            g = 0.0
            for i in range(n):
                g += xj[i] * r[i]
            g = g / n + b[j]
            new = _soft(g, l1) / denom
            d = new - b[j]
            if d != 0.0:
                for i in range(n):
                    r[i] -= d * xj[i]
                b[j] = new
                if abs(d) > dmax:
                    dmax = abs(d)
        if dmax <= tol:
            return it + 1
    return -1


@numba.njit(cache=True, nogil=True)
def _path_gaussian(X, yc, lams, alpha, tol, max_iter):
    n, p = X.shape
    L = lams.shape[0]
    B = np.zeros((L, p))
    b = np.zeros(p)
    r = yc.copy()
    status = np.zeros(L, dtype=np.int64)
    for k in range(L):
        status[k] = _cd_gaussian(X, r, b, lams[k], alpha, tol, max_iter)
        B[k] = b
    return B, status


@numba.njit(cache=True, nogil=True)
def _path_binomial(X, y, lams, alpha, b0_init, tol_inner, tol_outer, max_iter, max_outer, w_floor):
    n, p = X.shape
    L = lams.shape[0]
    B = np.zeros((L, p))
    B0 = np.zeros(L)
    b = np.zeros(p)
    b0 = b0_init
    eta = np.full(n, b0)
    w = np.empty(n)
    z = np.empty(n)
    r = np.empty(n)
    v = np.empty(p)
    status = np.zeros(L, dtype=np.int64)
    for k in range(L):
        lam = lams[k]
        l1 = lam * alpha
        l2 = lam * (1.0 - alpha)
        status[k] = -1
        for outer in range(max_outer):
            for i in range(n):
                pr = 1.0 / (1.0 + math.exp(-eta[i]))
                wi = pr * (1.0 - pr)
                if wi < w_floor:
                    wi = w_floor
                w[i] = wi
                z[i] = eta[i] + (y[i] - pr) / wi
                r[i] = z[i] - eta[i]
            sw = 0.0
            for i in range(n):
                sw += w[i]
            for j in range(p):
                s = 0.0
                for i in range(n):
                    s += w[i] * X[i, j] * X[i, j]
                v[j] = s / n
            b_old0 = b0
            b_old = b.copy()
            for it in range(max_iter):
                dmax = 0.0
                s = 0.0
                for i in range(n):
                    s += w[i] * r[i]
                d0 = s / sw
                if d0 != 0.0:
                    b0 += d0
                    for i in range(n):
                        r[i] -= d0
                    if abs(d0) > dmax:
                        dmax = abs(d0)
                for j in range(p):
                    g = 0.0
                    for i in range(n):
                        g += w[i] * X[i, j] * r[i]
                    g = g / n + v[j] * b[j]
                    new = _soft(g, l1) / (v[j] + l2)
                    d = new - b[j]
                    if d != 0.0:
                        for i in range(n):
                            r[i] -= d * X[i, j]
                        b[j] = new
                        if abs(d) > dmax:
                            dmax = abs(d)
                if dmax <= tol_inner:
                    break
            for i in range(n):
                s = b0
                for j in range(p):
                    s += X[i, j] * b[j]
                eta[i] = s
            dmax = abs(b0 - b_old0)
            for j in range(p):
                d = abs(b[j] - b_old[j])
                if d > dmax:
                    dmax = d
            if dmax <= tol_outer:
                status[k] = outer + 1
                break
        B[k] = b
        B0[k] = b0
    return B0, B, status


def _standardize(X):
    mx = X.mean(axis=0)
    sx = np.sqrt(np.mean((X - mx) ** 2, axis=0))
    ok = sx > 0
    Xs = np.zeros_like(X)
    Xs[:, ok] = (X[:, ok] - mx[ok]) / sx[ok]
    return Xs, mx, sx, ok


def binomial_target(y, levels=None):
    """Map a two-class target to 0/1 (second sorted level is 1); returns (y01, levels)."""
    if isinstance(y, Variable):
        levels = y.spec.levels if levels is None else levels
        y = y.values
    labels = np.asarray(y).astype(str)
    if levels is None:
        levels = sorted(set(labels.tolist()))
    levels = tuple(str(v) for v in levels)
    if len(levels) != 2:
        raise ValueError(f"binomial target needs exactly 2 classes, got {len(levels)}")
    y01 = (labels == levels[1]).astype(float)
    if y01.min() == y01.max():
        raise ValueError("binomial target has a single observed class")
    return y01, levels


def lambda_max(X, y, alpha: float, family: str = GAUSSIAN) -> float:
    """Smallest penalty with all slopes at zero; alpha below 1e-3 is floored for the anchor."""
    Xs, *_ = _standardize(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n = Xs.shape[0]
    g = np.abs(Xs.T @ (y - y.mean())) / n
    return float(g.max()) / max(alpha, ALPHA_FLOOR)


def lambda_grid(lmax: float, n: int, N: int, nlambda: int = 100, ratio: float | None = None) -> np.ndarray:
    if ratio is None:
        ratio = 1e-4 if n > N else 1e-2
    if nlambda < 2:
        raise ValueError("nlambda must be at least 2")
    return np.exp(np.linspace(math.log(lmax), math.log(lmax * ratio), nlambda))


@dataclass(frozen=True)
class EnetPath:
    alpha: float
    family: str
    lambdas: np.ndarray
    intercepts: np.ndarray
    coefs: np.ndarray
    levels: tuple[str, ...] = ()
    names: tuple[str, ...] = ()
    cv_error: np.ndarray | None = None
    cv_se: np.ndarray | None = None
    opt_index: int | None = None
    converged: np.ndarray | None = None

    @property
    def df(self) -> np.ndarray:
        return np.count_nonzero(self.coefs, axis=1)

    @property
    def lambda_opt(self) -> float | None:
        return None if self.opt_index is None else float(self.lambdas[self.opt_index])

    def index_of(self, lam: float) -> int:
        hits = np.flatnonzero(np.isclose(self.lambdas, lam, rtol=1e-12, atol=0.0))
        if not len(hits):
            raise ValueError(f"lambda {lam!r} is not on the path grid")
        return int(hits[0])

    def linear_predictor(self, Xnew, index: int) -> np.ndarray:
        Xnew = np.atleast_2d(np.asarray(Xnew, dtype=float))
        return self.intercepts[index] + Xnew @ self.coefs[index]

    def predict(self, Xnew, index: int | None = None) -> np.ndarray:
        """Response-scale predictions (probability of the second class for binomial)."""
        index = self.opt_index if index is None else index
        eta = self.linear_predictor(Xnew, index)
        return 1.0 / (1.0 + np.exp(-eta)) if self.family == BINOMIAL else eta

    def classify(self, Xnew, index: int | None = None) -> np.ndarray:
        if self.family != BINOMIAL:
            raise ValueError("classify needs a binomial path")
        prob = self.predict(Xnew, index)
        return np.where(prob > 0.5, self.levels[1], self.levels[0])


def fit_enet_path(X, y, alpha: float = 0.5, family: str = GAUSSIAN, nlambda: int = 100,
                  lambdas=None, ratio: float | None = None, tol: float = 1e-9,
                  tol_outer: float = 1e-7, names=None, levels=None) -> EnetPath:
    """Warm-started coordinate descent along a decreasing lambda grid."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    if family not in (GAUSSIAN, BINOMIAL):
        raise ValueError(f"unknown family {family!r}")
    X = np.asarray(X, dtype=float)
    n, N = X.shape
    if family == BINOMIAL:
        yv, levels = binomial_target(y, levels)
    else:
        yv = np.asarray(y.values if isinstance(y, Variable) else y, dtype=float).ravel()
        levels = ()
    if yv.shape[0] != n:
        raise ValueError(f"y has {yv.shape[0]} rows, X has {n}")
    Xs, mx, sx, ok = _standardize(X)
    auto = lambdas is None
    if auto:
        lmax = lambda_max(X, yv, alpha, family)
        lambdas = lambda_grid(lmax, n, N, nlambda, ratio)
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(np.diff(lambdas) > 0):
        raise ValueError("lambdas must be decreasing")

    Xa = np.ascontiguousarray(Xs[:, ok])
    ybar = yv.mean()
    if family == GAUSSIAN:
        Bs, status = _path_gaussian(Xa, yv - ybar, lambdas, alpha, tol, MAX_ITER)
        B0s = np.full(len(lambdas), ybar)
    else:
        b0 = math.log(ybar / (1.0 - ybar))
        B0s, Bs, status = _path_binomial(Xa, yv, lambdas, alpha, b0, tol, tol_outer,
                                         MAX_ITER, MAX_OUTER, W_FLOOR)
    if auto and alpha > 0:
        # the first grid point is lambda_max, where the slopes are zero by definition
        Bs[0] = 0.0
        B0s[0] = ybar if family == GAUSSIAN else math.log(ybar / (1.0 - ybar))
    if np.any(status < 0):
        warnings.warn(f"coordinate descent did not converge at {int(np.sum(status < 0))} lambda values",
                      stacklevel=2)

    coefs = np.zeros((len(lambdas), N))
    coefs[:, ok] = Bs / sx[ok]
    intercepts = B0s - coefs @ mx
    names = tuple(names) if names is not None else tuple(f"V{j + 1}" for j in range(N))
    return EnetPath(alpha=alpha, family=family, lambdas=lambdas, intercepts=intercepts,
                    coefs=coefs, levels=tuple(levels), names=names, converged=status >= 0)


def cv_enet(X, y, alpha: float = 0.5, family: str = GAUSSIAN, scheme="loo", nlambda: int = 100,
            lambdas=None, ratio: float | None = None, names=None, levels=None) -> EnetPath:
    """Cross-validated path: misclassification (binomial) or MSE (gaussian) per lambda.

    All folds share the full-data grid.  ``lambda_opt`` is the largest lambda
    whose error is within one standard error of the minimum.
    """
    X = np.asarray(X, dtype=float)
    full = fit_enet_path(X, y, alpha, family, nlambda, lambdas, ratio, names=names, levels=levels)
    n = X.shape[0]
    if family == BINOMIAL:
        yv, lv = binomial_target(y, levels)
        labels = np.array(lv)[yv.astype(int)]
        strata = labels
    else:
        yv = np.asarray(y.values if isinstance(y, Variable) else y, dtype=float).ravel()
        strata = None
    segs = segments(n, as_scheme(scheme), strata)

    def run(test):
        train = np.setdiff1d(np.arange(n), test)
        ytrain = labels[train] if family == BINOMIAL else yv[train]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            path = fit_enet_path(X[train], ytrain, alpha, family, lambdas=full.lambdas,
                                 levels=full.levels if family == BINOMIAL else None)
        eta = path.intercepts[None, :] + X[test] @ path.coefs.T
        if family == BINOMIAL:
            return ((eta > 0).astype(float) != yv[test][:, None]).astype(float)
        return (eta - yv[test][:, None]) ** 2

    losses = np.empty((n, len(full.lambdas)))
    for test, loss in zip(segs, map_ordered(run, segs)):
        losses[test] = loss
    error = losses.mean(axis=0)
    se = losses.std(axis=0, ddof=1) / math.sqrt(n)
    opt = one_se_index(error, se, prefer="first")
    return EnetPath(alpha=full.alpha, family=full.family, lambdas=full.lambdas,
                    intercepts=full.intercepts, coefs=full.coefs, levels=full.levels,
                    names=full.names, cv_error=error, cv_se=se, opt_index=opt,
                    converged=full.converged)


def nonzero_set(path: EnetPath, lam: float | None = None) -> list[tuple[int, str]]:
    """(index, name) of every nonzero slope at ``lam`` (default: the selected lambda)."""
    k = path.opt_index if lam is None else path.index_of(lam)
    if k is None:
        raise ValueError("path has no selected lambda; pass one explicitly")
    return [(int(j), path.names[j]) for j in np.flatnonzero(path.coefs[k] != 0)]
