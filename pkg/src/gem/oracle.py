"""Synthetic designed data and independent reference computations.

The oracles here deliberately use different algorithms from the library
code they check (explicit inverses, covariance eigendecomposition, a
separate PLS loop) and import nothing from those modules.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .dataset import Dataset, Variable


def rng(seed: int) -> np.random.Generator:
    """PCG64 generator; gaussians come from its ziggurat transform."""
    return np.random.Generator(np.random.PCG64(seed))


def _labels(L: int) -> list[str]:
    width = len(str(L))
    return [f"L{str(k + 1).zfill(width)}" for k in range(L)]


@dataclass(frozen=True)
class DesignSkeleton:
    variables: tuple[Variable, ...]
    replicate: np.ndarray

    @property
    def n(self) -> int:
        return len(self.replicate)


def generate_balanced_design(levels: Sequence[int], reps: int, names: Sequence[str] | None = None) -> DesignSkeleton:
    """Full crossing of the factors, ``reps`` replicates per cell.

    Rows vary the first factor slowest and the replicate fastest.  Level
    labels are L1..L<L>, zero-padded so they sort in numeric order.
    """
    levels = list(levels)
    if not levels:
        raise ValueError("need at least one factor")
    if any(L < 2 for L in levels):
        raise ValueError("every factor needs at least 2 levels")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    names = list(names) if names is not None else [f"f{k + 1}" for k in range(len(levels))]
    rows = [cell + (r + 1,) for cell in itertools.product(*[range(L) for L in levels]) for r in range(reps)]
    rows = np.array(rows)
    variables = []
    for k, (name, L) in enumerate(zip(names, levels)):
        labs = _labels(L)
        variables.append(Variable.categorical(name, [labs[i] for i in rows[:, k]], labs))
    return DesignSkeleton(tuple(variables), rows[:, -1])


@dataclass(frozen=True)
class PlantedEffect:
    """Signal for one term on a block of responses.

    ``size`` plays the role of a sum-coded coefficient: factor levels get
    offsets spread evenly from ``-size`` to ``+size`` (a two-level factor
    gives -size/+size), covariates get slope ``size`` on their centered
    values, and interactions multiply the member patterns.  ``size`` may be
    one number or one number per response.
    """

    term: str
    size: float | Sequence[float]
    responses: Sequence[int]


@dataclass(frozen=True)
class Covariate:
    name: str
    low: float
    high: float


@dataclass(frozen=True)
class SynthSpec:
    levels: Sequence[int]
    reps: int
    n_responses: int
    effects: Sequence[PlantedEffect] = ()
    covariates: Sequence[Covariate] = ()
    noise_sd: float = 1.0
    seed: int = 0
    factor_names: Sequence[str] | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        d = dict(d)
        d["effects"] = [PlantedEffect(**e) for e in d.get("effects", [])]
        d["covariates"] = [Covariate(**c) for c in d.get("covariates", [])]
        return cls(**d)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))


@dataclass(frozen=True)
class SynthData:
    data: Dataset
    truth: dict = field(default_factory=dict)
    supports: dict = field(default_factory=dict)


def _pattern(var: Variable) -> np.ndarray:
    if var.spec.is_categorical:
        L = len(var.spec.levels)
        index = {lev: k for k, lev in enumerate(var.spec.levels)}
        return np.array([2.0 * index[v] / (L - 1) - 1.0 for v in var.values])
    x = np.asarray(var.values, dtype=float)
    return x - x.mean()


def plant_effects(spec: SynthSpec) -> SynthData:
    """``Y = sum of planted effects + N(0, noise_sd^2)`` with the ground-truth effects recorded."""
    skel = generate_balanced_design(spec.levels, spec.reps, spec.factor_names)
    n, N = skel.n, spec.n_responses
    g = rng(spec.seed)
    variables = list(skel.variables)
    for cov in spec.covariates:
        variables.append(Variable.continuous(cov.name, g.uniform(cov.low, cov.high, size=n)))
    by_name = {v.name: v for v in variables}

    truth = {}
    supports = {}
    Y = np.zeros((n, N))
    for eff in spec.effects:
        members = eff.term.replace(" ", "").split(":")
        pattern = np.ones(n)
        for m in members:
            if m not in by_name:
                raise ValueError(f"planted term {eff.term!r} uses unknown variable {m!r}")
            pattern = pattern * _pattern(by_name[m])
        cols = np.asarray(eff.responses, dtype=int)
        if cols.size and (cols.min() < 0 or cols.max() >= N):
            raise ValueError(f"planted term {eff.term!r} targets responses outside 0..{N - 1}")
        size = np.broadcast_to(np.asarray(eff.size, dtype=float), cols.shape)
        E = np.zeros((n, N))
        E[:, cols] = np.outer(pattern, size)
        truth[eff.term] = truth.get(eff.term, 0) + E
        supports[eff.term] = sorted(set(supports.get(eff.term, [])) | set(cols.tolist()))
        Y += E
    if spec.noise_sd > 0:
        Y = Y + spec.noise_sd * g.standard_normal((n, N))

    data = Dataset(
        Y=Y,
        response_names=tuple(f"y{j + 1}" for j in range(N)),
        sample_ids=tuple(f"s{i + 1}" for i in range(n)),
        variables=tuple(variables),
    )
    return SynthData(data, truth, supports)


def ols_oracle(X, Y) -> np.ndarray:
    """``(X'X)^{-1} X'Y`` with an explicit inverse."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    G = X.T @ X
    if np.linalg.cond(G) > 1e14:
        raise np.linalg.LinAlgError("X'X is singular")
    return np.linalg.inv(G) @ (X.T @ Y)


def cell_means_oracle(d: Dataset, factor: str):
    """Per-level mean of ``Y`` minus the grand mean; returns ``(levels, L x N deviations)``."""
    v = d.variable(factor)
    if not v.spec.is_categorical:
        raise ValueError(f"{factor!r} is not categorical")
    counts = [int(np.sum(v.values == lev)) for lev in v.spec.levels]
    if len(set(counts)) != 1 or counts[0] == 0:
        raise ValueError(f"factor {factor!r} is unbalanced: {counts}")
    grand = d.Y.mean(axis=0)
    dev = np.array([d.Y[v.values == lev].mean(axis=0) - grand for lev in v.spec.levels])
    return v.spec.levels, dev


def cell_means_rows(d: Dataset, factor: str) -> np.ndarray:
    levels, dev = cell_means_oracle(d, factor)
    index = {lev: k for k, lev in enumerate(levels)}
    return dev[[index[x] for x in d.variable(factor).values]]


def eig_oracle(X):
    """Eigenpairs of the sample covariance, largest first."""
    X = np.asarray(X, dtype=float)
    Xc = X - X.mean(axis=0)
    C = Xc.T @ Xc / (X.shape[0] - 1)
    vals, vecs = np.linalg.eigh(C)
    order = np.argsort(vals)[::-1]
    return np.clip(vals[order], 0.0, None), vecs[:, order]


def pls_oracle(X, y, A: int) -> np.ndarray:
    """Textbook PLS1 with explicit deflation of both X and y; returns the A-component coefficients."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, N = X.shape
    if not 0 <= A <= min(n - 1, N):
        raise ValueError(f"A must be in 0..{min(n - 1, N)}")
    if A == 0:
        return np.zeros(N)
    E = X - X.mean(axis=0)
    f = y - y.mean()
    W, P, q = [], [], []
    for _ in range(A):
        w = E.T @ f
        w = w / np.sqrt(w @ w)
        t = E @ w
        p = E.T @ t / (t @ t)
        qa = (f @ t) / (t @ t)
        E = E - np.outer(t, p)
        f = f - qa * t
        W.append(w)
        P.append(p)
        q.append(qa)
    W = np.array(W).T
    P = np.array(P).T
    return W @ np.linalg.inv(P.T @ W) @ np.array(q)


def kkt_check(X, y, coefs, lam: float, alpha: float, family: str = "gaussian") -> float:
    """Largest violation of the elastic-net optimality conditions.

    ``coefs`` is ``(intercept, slopes)`` on the original scale; conditions
    are evaluated on columns standardized to mean 0 and 1/n variance.  For
    a binomial family ``y`` must be 0/1.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    b0, b = coefs
    b = np.asarray(b, dtype=float)
    n = X.shape[0]
    mean = X.mean(axis=0)
    sd = np.sqrt(((X - mean) ** 2).mean(axis=0))
    eta = b0 + X @ b
    mu = eta if family == "gaussian" else 1.0 / (1.0 + np.exp(-eta))
    resid = y - mu
    worst = abs(resid.mean())
    for j in range(X.shape[1]):
        if sd[j] == 0:
            continue
        xs = (X[:, j] - mean[j]) / sd[j]
        bs = b[j] * sd[j]
        grad = -(xs @ resid) / n
        if bs != 0:
            v = abs(grad + lam * alpha * np.sign(bs) + lam * (1 - alpha) * bs)
        else:
            v = max(0.0, abs(grad) - lam * alpha)
        worst = max(worst, v)
    return float(worst)
