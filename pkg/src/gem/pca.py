"""Principal component analysis of ER matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PcaModel:
    center: np.ndarray
    scale: np.ndarray | None
    T: np.ndarray
    P: np.ndarray
    eig: np.ndarray
    explvar_X: np.ndarray

    @property
    def ncomp(self) -> int:
        return self.P.shape[1]

    def project(self, Xnew) -> np.ndarray:
        return project(self, Xnew)


def _prepare(X, scale):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-d matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    center = X.mean(axis=0)
    Xc = X - center
    sd = None
    if scale:
        sd = X.std(axis=0, ddof=1)
        if np.any(sd == 0):
            raise ValueError(f"cannot scale constant columns {np.flatnonzero(sd == 0).tolist()}")
        Xc = Xc / sd
    return Xc, center, sd


def fit_pca(X, ncomp: int | None = None, scale: bool = False) -> PcaModel:
    """PCA by SVD of the centered (optionally autoscaled) matrix.

    Each loading column is signed so that its largest-magnitude entry is positive.
    """
    Xc, center, sd = _prepare(X, scale)
    n, N = Xc.shape
    amax = min(n - 1, N)
    if ncomp is None:
        ncomp = amax
    if not 1 <= ncomp <= amax:
        raise ValueError(f"ncomp must be in 1..{amax}, got {ncomp}")
    U, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    s = s[:amax]
    P = Vt[:ncomp].T.copy()
    T = U[:, :ncomp] * s[:ncomp]
    idx = np.argmax(np.abs(P), axis=0)
    signs = np.sign(P[idx, np.arange(ncomp)])
    signs[signs == 0] = 1.0
    P *= signs
    T *= signs
    ss = s**2
    total = ss.sum()
    explvar = ss[:ncomp] / total if total > 0 else np.zeros(ncomp)
    return PcaModel(center=center, scale=sd, T=T, P=P, eig=s[:ncomp], explvar_X=explvar)


def project(model: PcaModel, Xnew) -> np.ndarray:
    Xnew = np.atleast_2d(np.asarray(Xnew, dtype=float))
    if Xnew.shape[1] != model.P.shape[0]:
        raise ValueError(f"Xnew has {Xnew.shape[1]} columns, model has {model.P.shape[0]}")
    Z = Xnew - model.center
    if model.scale is not None:
        Z = Z / model.scale
    return Z @ model.P


def correlation_loadings(model, X) -> np.ndarray:
    """Pearson correlation of every column of ``X`` with every score column.

    Works for any model exposing scores as ``T``.  Constant columns get 0.
    """
    X = np.asarray(X, dtype=float)
    T = np.asarray(model.T, dtype=float)
    Xc = X - X.mean(axis=0)
    Tc = T - T.mean(axis=0)
    xn = np.sqrt(np.sum(Xc**2, axis=0))
    tn = np.sqrt(np.sum(Tc**2, axis=0))
    num = Xc.T @ Tc
    den = np.outer(xn, tn)
    with np.errstate(invalid="ignore", divide="ignore"):
        C = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return np.clip(C, -1.0, 1.0)


def explained_y(T, y) -> np.ndarray:
    """Cumulative fraction of variance in ``y`` explained by regressing on the first a score columns."""
    T = np.asarray(T, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    yc = y - y.mean()
    Tc = T - T.mean(axis=0)
    tot = float(yc @ yc)
    out = np.zeros(T.shape[1])
    for a in range(1, T.shape[1] + 1):
        coef, *_ = np.linalg.lstsq(Tc[:, :a], yc, rcond=None)
        r = yc - Tc[:, :a] @ coef
        out[a - 1] = 1.0 - float(r @ r) / tot if tot > 0 else 0.0
    return out
