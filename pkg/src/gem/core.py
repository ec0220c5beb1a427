"""GLM decomposition of a response matrix into effect matrices and residuals."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import solve_triangular

from .dataset import Dataset
from .design import CodedDesign, DesignError, ModelSpec, Term, VariableCoding, build_design, parse_formula

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class GemFit:
    """Result of fitting every response on the coded design at once.

    ``Y = 1 mu + sum_d E_d + R``.  The ER matrix of term ``d`` is ``E_d + R``;
    the intercept row ``mu`` is left out of every ER matrix.
    """

    mu: np.ndarray
    beta: dict
    effects: dict
    R: np.ndarray
    design: CodedDesign
    response_names: tuple[str, ...] = ()
    sample_ids: tuple[str, ...] = ()

    @property
    def spec(self) -> ModelSpec:
        return self.design.spec

    @property
    def terms(self) -> tuple[Term, ...]:
        return self.design.terms

    def term(self, term) -> Term:
        try:
            return self.spec.find(term)
        except KeyError:
            raise KeyError(f"unknown term {term}") from None

    def effect(self, term) -> np.ndarray:
        return self.effects[self.term(term)]

    def er(self, term) -> np.ndarray:
        return self.effects[self.term(term)] + self.R

    def combined_er(self, terms) -> np.ndarray:
        terms = [self.term(t) for t in terms]
        if not terms:
            raise ValueError("combined_er needs at least one term")
        out = self.R.copy()
        for t in dict.fromkeys(terms):
            out += self.effects[t]
        return out

    def reconstruct(self) -> np.ndarray:
        out = np.broadcast_to(self.mu, self.R.shape) + self.R
        for E in self.effects.values():
            out = out + E
        return out


def fit_gem(design: CodedDesign, Y) -> GemFit:
    """Least-squares fit of all columns of ``Y`` from a single QR factorization of ``X``."""
    X = design.X
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != X.shape[0]:
        raise ValueError(f"Y has {Y.shape[0]} rows, design has {X.shape[0]}")
    if not np.all(np.isfinite(Y)):
        raise ValueError("Y contains non-finite values")
    Q, Rx = np.linalg.qr(X)
    d = np.abs(np.diag(Rx))
    if d.min() < 1e-10 * d.max():
        raise DesignError("design matrix is rank deficient")
    B = solve_triangular(Rx, Q.T @ Y)
    fitted = X @ B
    resid = Y - fitted
    beta = {}
    effects = {}
    for term in design.terms:
        s = design.blocks[term]
        beta[term] = B[s]
        effects[term] = X[:, s] @ B[s]
    return GemFit(mu=B[0], beta=beta, effects=effects, R=resid, design=design)


def gem(formula: str, data: Dataset) -> GemFit:
    """Parse ``formula``, code the design from ``data`` and fit."""
    spec = parse_formula(formula)
    design = build_design(spec, data)
    fit = fit_gem(design, data.Y)
    return GemFit(fit.mu, fit.beta, fit.effects, fit.R, design,
                  response_names=data.response_names, sample_ids=data.sample_ids)


def effect_matrix(fit: GemFit, term) -> np.ndarray:
    return fit.effect(term)


def er_matrix(fit: GemFit, term) -> np.ndarray:
    return fit.er(term)


def combined_er(fit: GemFit, terms) -> np.ndarray:
    return fit.combined_er(terms)


def reconstruct(fit: GemFit) -> np.ndarray:
    return fit.reconstruct()


def variance_summary(fit: GemFit) -> dict:
    """Share of centered total sum of squares carried by each effect and by the residual.

    For unbalanced designs effects are not orthogonal, so the shares need not sum to 1.
    """
    Yc = fit.reconstruct() - fit.mu
    total = float(np.sum(Yc**2))
    if total == 0:
        total = 1.0
    out = {t.name: float(np.sum(E**2)) / total for t, E in fit.effects.items()}
    out["Residuals"] = float(np.sum(fit.R**2)) / total
    return out


def _matrix(a) -> list:
    return [[float(x) for x in row] for row in np.atleast_2d(a)]


def fit_to_dict(fit: GemFit, embed_matrices: bool = False) -> dict:
    design = fit.design
    doc = {
        "schema_version": SCHEMA_VERSION,
        "formula": str(fit.spec),
        "response_names": list(fit.response_names),
        "sample_ids": list(fit.sample_ids),
        "codings": [c.to_dict() for c in design.codings.values()],
        "mu": [float(x) for x in fit.mu],
        "terms": [
            {
                "term": t.name,
                "columns": [design.blocks[t].start, design.blocks[t].stop],
                "beta": _matrix(fit.beta[t]),
            }
            for t in fit.terms
        ],
    }
    if embed_matrices:
        doc["X"] = _matrix(design.X)
        doc["R"] = _matrix(fit.R)
    return doc


def save_fit(fit: GemFit, path, embed_matrices: bool = False) -> None:
    doc = fit_to_dict(fit, embed_matrices)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_fit(path, data: Dataset | None = None) -> GemFit:
    """Read a persisted fit.

    Residuals come from the embedded matrices when present, otherwise from
    ``data`` (the design is rebuilt with the stored level sets and centers).
    """
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported gemfit schema version {doc.get('schema_version')!r}")
    spec = parse_formula(doc["formula"])
    codings = {c["name"]: VariableCoding.from_dict(c) for c in doc["codings"]}
    mu = np.array(doc["mu"], dtype=float)
    N = mu.shape[0]
    B = np.vstack([mu[None, :]] + [np.array(t["beta"], dtype=float).reshape(-1, N) for t in doc["terms"]])

    if "X" in doc:
        X = np.array(doc["X"], dtype=float)
        R = np.array(doc["R"], dtype=float)
        blocks = {Term.parse(t["term"]): slice(*t["columns"]) for t in doc["terms"]}
        design = CodedDesign(X=X, spec=spec, blocks=blocks, codings=codings)
        sample_ids = tuple(doc.get("sample_ids", ()))
    elif data is not None:
        design = build_design(spec, data, codings)
        R = data.Y - design.X @ B
        sample_ids = data.sample_ids
    else:
        raise ValueError("fit has no embedded matrices; pass the dataset to rebuild residuals")

    beta = {t: B[design.blocks[t]] for t in design.terms}
    effects = {t: design.X[:, design.blocks[t]] @ beta[t] for t in design.terms}
    return GemFit(mu=mu, beta=beta, effects=effects, R=R, design=design,
                  response_names=tuple(doc.get("response_names", ())), sample_ids=sample_ids)
