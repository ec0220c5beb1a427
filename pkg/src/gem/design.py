"""Model formulas and sum-coded design matrices."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, Variable

RANK_TOL = 1e-10

_NAME = r"[A-Za-z_.][A-Za-z0-9_.]*"
_TERM_RE = re.compile(rf"^{_NAME}(?::{_NAME})*$")
_NAME_RE = re.compile(rf"^{_NAME}$")


class DesignError(ValueError):
    pass


class FormulaError(DesignError):
    pass


@dataclass(frozen=True, order=True)
class Term:
    """A main effect (one variable) or an interaction (two or more)."""

    variables: tuple[str, ...]

    def __post_init__(self):
        if not self.variables:
            raise FormulaError("empty term")
        if len(set(self.variables)) != len(self.variables):
            raise FormulaError(f"repeated variable in interaction {':'.join(self.variables)}")

    @classmethod
    def parse(cls, text: str) -> "Term":
        text = re.sub(r"\s*:\s*", ":", text.strip())
        if not _TERM_RE.match(text):
            raise FormulaError(f"cannot parse term {text!r}")
        return cls(tuple(text.split(":")))

    @property
    def name(self) -> str:
        return ":".join(self.variables)

    @property
    def is_interaction(self) -> bool:
        return len(self.variables) > 1

    def __str__(self):
        return self.name

    def same_as(self, other: "Term") -> bool:
        return frozenset(self.variables) == frozenset(other.variables)


def as_term(term) -> Term:
    return term if isinstance(term, Term) else Term.parse(str(term))


@dataclass(frozen=True)
class ModelSpec:
    response: str
    terms: tuple[Term, ...]

    def __post_init__(self):
        if not self.terms:
            raise FormulaError("model has no terms")
        for i, t in enumerate(self.terms):
            if any(t.same_as(u) for u in self.terms[:i]):
                raise FormulaError(f"duplicate term {t}")

    @property
    def variables(self) -> list[str]:
        return list(dict.fromkeys(v for t in self.terms for v in t.variables))

    def find(self, term) -> Term:
        term = as_term(term)
        for t in self.terms:
            if t.same_as(term):
                return t
        raise KeyError(f"term {term} not in model")

    def __str__(self):
        return f"{self.response} ~ " + " + ".join(t.name for t in self.terms)


def parse_formula(text: str) -> ModelSpec:
    """Parse ``response ~ term + term + ...`` where a term is ``a`` or ``a:b[:c...]``."""
    if text.count("~") != 1:
        raise FormulaError(f"formula must contain exactly one '~': {text!r}")
    lhs, rhs = (s.strip() for s in text.split("~"))
    if not _NAME_RE.match(lhs):
        raise FormulaError(f"invalid response name {lhs!r}")
    if not rhs:
        raise FormulaError("empty right-hand side")
    terms = tuple(Term.parse(part) for part in rhs.split("+"))
    return ModelSpec(lhs, terms)


def code_factor(labels, levels=None) -> np.ndarray:
    """Sum-code ``labels`` into an ``n x (L-1)`` block.

    ``levels`` defaults to the sorted distinct labels.  The first level maps
    to all -1; level ``j >= 2`` (1-based) gets a single +1 in block column
    ``L - j + 1``, so with three levels the rows are (-1,-1), (0,1), (1,0).
    """
    labels = [str(x) for x in labels]
    if levels is None:
        levels = sorted(set(labels))
    levels = list(levels)
    L = len(levels)
    if L < 2:
        raise DesignError("a factor needs at least 2 levels")
    index = {lev: k for k, lev in enumerate(levels)}
    block = np.zeros((len(labels), L - 1))
    for i, lab in enumerate(labels):
        try:
            k = index[lab]
        except KeyError:
            raise DesignError(f"label {lab!r} is not one of the levels {levels}") from None
        if k == 0:
            block[i, :] = -1.0
        else:
            block[i, L - 1 - k] = 1.0
    return block


def interaction_block(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Element-wise products of every column of ``a`` with every column of ``b`` (a-major)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if a.shape[0] != b.shape[0]:
        raise DesignError(f"blocks have {a.shape[0]} and {b.shape[0]} rows")
    return (a[:, :, None] * b[:, None, :]).reshape(a.shape[0], -1) + 0.0


@dataclass(frozen=True)
class VariableCoding:
    """How a variable enters the design: factor levels, or centering constant."""

    name: str
    kind: str
    levels: tuple[str, ...] = ()
    center: float = 0.0

    def block(self, variable: Variable) -> np.ndarray:
        if self.levels:
            return code_factor(variable.values, self.levels)
        return (np.asarray(variable.values, dtype=float) - self.center)[:, None]

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind}
        if self.levels:
            d["levels"] = list(self.levels)
        else:
            d["center"] = self.center
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VariableCoding":
        return cls(d["name"], d["kind"], tuple(d.get("levels", ())), float(d.get("center", 0.0)))


@dataclass(frozen=True)
class CodedDesign:
    X: np.ndarray
    spec: ModelSpec
    blocks: dict = field(default_factory=dict)
    codings: dict = field(default_factory=dict)

    @property
    def terms(self) -> tuple[Term, ...]:
        return self.spec.terms

    def block(self, term) -> np.ndarray:
        return self.X[:, self.blocks[self.spec.find(term)]]

    def width(self, term) -> int:
        s = self.blocks[self.spec.find(term)]
        return s.stop - s.start

    def column_names(self) -> list[str]:
        names = ["(Intercept)"]
        for t in self.terms:
            k = self.width(t)
            names.extend([t.name] if k == 1 else [f"{t.name}[{j + 1}]" for j in range(k)])
        return names


def _rank_ok(X: np.ndarray) -> bool:
    if X.shape[0] < X.shape[1]:
        return False
    s = np.linalg.svd(X, compute_uv=False)
    return s[0] > 0 and s[-1] >= RANK_TOL * s[0]


def _term_block(term: Term, d: Dataset, codings: dict) -> np.ndarray:
    blocks = []
    n_cont = 0
    for name in term.variables:
        coding = codings[name]
        n_cont += not coding.levels
        blocks.append(coding.block(d.variable(name)))
    if term.is_interaction and n_cont > 1:
        raise DesignError(f"interaction {term} has more than one continuous variable")
    out = blocks[0]
    for b in blocks[1:]:
        out = interaction_block(out, b)
    return out


def variable_codings(spec: ModelSpec, d: Dataset, center: bool = True) -> dict:
    codings = {}
    for name in spec.variables:
        try:
            v = d.variable(name)
        except KeyError:
            raise DesignError(f"unknown variable {name!r}") from None
        if v.spec.is_categorical:
            codings[name] = VariableCoding(name, v.kind, v.spec.levels)
        else:
            codings[name] = VariableCoding(name, v.kind, center=float(np.mean(v.values)) if center else 0.0)
    return codings


def build_design(spec: ModelSpec, d: Dataset, codings: dict | None = None) -> CodedDesign:
    """Assemble ``[1 | block_1 | block_2 | ...]`` in term order and check its rank.

    ``codings`` overrides the level sets and centering constants, which is
    how a persisted fit rebuilds exactly the same columns on new rows.
    """
    if codings is None:
        codings = variable_codings(spec, d)
    else:
        missing = [v for v in spec.variables if v not in codings]
        if missing:
            raise DesignError(f"no coding for variables {missing}")
    cols = [np.ones((d.n, 1))]
    blocks = {}
    start = 1
    for term in spec.terms:
        b = _term_block(term, d, codings)
        cols.append(b)
        blocks[term] = slice(start, start + b.shape[1])
        start += b.shape[1]
        if not _rank_ok(np.hstack(cols)):
            raise DesignError(f"design is rank deficient at term {term} (aliased with earlier terms)")
    X = np.hstack(cols)
    X.setflags(write=False)
    return CodedDesign(X=X, spec=spec, blocks=blocks, codings=codings)
