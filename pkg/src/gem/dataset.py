"""Sample-by-response datasets with typed input variables."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

CATEGORICAL = "categorical"
CONTINUOUS = "continuous"

MISSING_TOKENS = frozenset({"", "NA", "NaN", "nan", "N/A", "NULL", "null", "."})


class DataError(ValueError):
    """Raised for malformed or incomplete input data."""


@dataclass(frozen=True)
class VariableSpec:
    name: str
    kind: str
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (CATEGORICAL, CONTINUOUS):
            raise DataError(f"unknown variable kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if len(set(self.levels)) != len(self.levels):
                raise DataError(f"variable {self.name!r} has duplicate levels")
            if len(self.levels) < 2:
                raise DataError(
                    f"categorical variable {self.name!r} needs at least 2 levels"
                )
        elif self.levels:
            raise DataError(f"continuous variable {self.name!r} cannot have levels")

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL


@dataclass(frozen=True)
class Variable:
    """A typed input variable together with its per-sample values."""

    spec: VariableSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if self.spec.is_categorical:
            values = values.astype(str)
            unseen = set(values.tolist()) - set(self.spec.levels)
            if unseen:
                raise DataError(
                    f"variable {self.name!r} has values outside its levels: "
                    f"{sorted(unseen)}"
                )
        else:
            values = values.astype(float)
            if not np.all(np.isfinite(values)):
                raise DataError(f"continuous variable {self.name!r} has non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def kind(self) -> str:
        return self.spec.kind

    @classmethod
    def categorical(cls, name: str, values, levels: Sequence[str] | None = None):
        values = [str(v) for v in values]
        if levels is None:
            levels = sorted(dict.fromkeys(values))
        return cls(VariableSpec(name, CATEGORICAL, tuple(levels)), np.array(values))

    @classmethod
    def continuous(cls, name: str, values):
        return cls(VariableSpec(name, CONTINUOUS), np.asarray(values, dtype=float))


@dataclass(frozen=True)
class Dataset:
    """Response matrix ``Y`` (samples in rows) plus the variables describing each sample."""

    Y: np.ndarray
    response_names: tuple[str, ...]
    sample_ids: tuple[str, ...]
    variables: tuple[Variable, ...] = ()

    def __post_init__(self):
        Y = np.array(self.Y, dtype=float)
        if Y.ndim != 2:
            raise DataError("Y must be a 2-d matrix")
        n, N = Y.shape
        if n < 3:
            raise DataError(f"need at least 3 samples, got {n}")
        if N < 1:
            raise DataError("need at least one response")
        if not np.all(np.isfinite(Y)):
            i, j = np.argwhere(~np.isfinite(Y))[0]
            raise DataError(f"non-finite response at ({i}, {j})")
        if len(self.response_names) != N:
            raise DataError("response_names length does not match Y")
        if len(self.sample_ids) != n:
            raise DataError("sample_ids length does not match Y")
        if len(set(self.sample_ids)) != n:
            raise DataError("duplicate sample id")
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise DataError("duplicate variable name")
        for v in self.variables:
            if len(v.values) != n:
                raise DataError(f"variable {v.name!r} has {len(v.values)} values, expected {n}")
        Y.setflags(write=False)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "response_names", tuple(self.response_names))
        object.__setattr__(self, "sample_ids", tuple(str(s) for s in self.sample_ids))
        object.__setattr__(self, "variables", tuple(self.variables))

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def N(self) -> int:
        return self.Y.shape[1]

    def variable(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(f"unknown variable {name!r}")

    def subset(self, rows) -> "Dataset":
        """Return the dataset restricted to ``rows``; declared levels are kept."""
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        return Dataset(
            Y=self.Y[rows],
            response_names=self.response_names,
            sample_ids=tuple(self.sample_ids[i] for i in rows),
            variables=tuple(Variable(v.spec, v.values[rows]) for v in self.variables),
        )

    def with_responses(self, Y, response_names=None) -> "Dataset":
        return Dataset(
            Y=Y,
            response_names=tuple(response_names or self.response_names),
            sample_ids=self.sample_ids,
            variables=self.variables,
        )


@dataclass(frozen=True)
class Schema:
    """Column roles for :func:`load_dataset`.

    ``responses`` is either an explicit list of column names or a single
    string.  A string is read as a column-name prefix, or as an inclusive
    ``first:last`` range of header names.  Variables default to every
    remaining column except ``id_column``; their kind is inferred (all
    cells numeric means continuous) unless forced.
    """

    responses: str | Sequence[str]
    variables: Sequence[str] | None = None
    id_column: str | None = None
    categorical: Sequence[str] = ()
    continuous: Sequence[str] = ()

    def response_columns(self, header: Sequence[str]) -> list[str]:
        if not isinstance(self.responses, str):
            cols = list(self.responses)
            missing = [c for c in cols if c not in header]
            if missing:
                raise DataError(f"response columns not found: {missing}")
            return cols
        spec = self.responses
        if ":" in spec:
            first, last = spec.split(":", 1)
            if first not in header or last not in header:
                raise DataError(f"response range {spec!r} not in header")
            i, j = header.index(first), header.index(last)
            if j < i:
                raise DataError(f"response range {spec!r} is reversed")
            return list(header[i : j + 1])
        cols = [c for c in header if c.startswith(spec)]
        if not cols:
            raise DataError(f"no columns start with {spec!r}")
        return cols


def _is_number(text: str) -> bool:
    try:
        return math.isfinite(float(text))
    except ValueError:
        return False


def load_dataset(path, schema: Schema) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        rows = [r for r in reader if any(cell.strip() for cell in r)]

    if len(set(header)) != len(header):
        raise DataError("duplicate column names in header")
    for k, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise DataError(f"row {k} has {len(row)} cells, expected {len(header)}")

    col = {name: j for j, name in enumerate(header)}
    responses = schema.response_columns(header)
    if schema.id_column is not None and schema.id_column not in col:
        raise DataError(f"id column {schema.id_column!r} not found")
    if schema.variables is None:
        var_names = [h for h in header if h not in responses and h != schema.id_column]
    else:
        var_names = list(schema.variables)
    for name in var_names:
        if name not in col:
            raise DataError(f"variable column {name!r} not found")
    if not var_names:
        raise DataError("schema names no variable columns")

    Y = np.empty((len(rows), len(responses)))
    for i, row in enumerate(rows):
        for j, name in enumerate(responses):
            cell = row[col[name]].strip()
            if cell in MISSING_TOKENS:
                raise DataError(f"missing value at ({i + 1}, {name})")
            try:
                Y[i, j] = float(cell)
            except ValueError:
                raise DataError(f"non-numeric response at ({i + 1}, {name}): {cell!r}") from None

    if schema.id_column is not None:
        ids = [row[col[schema.id_column]].strip() for row in rows]
        seen = set()
        for s in ids:
            if s in seen:
                raise DataError(f"duplicate sample id {s!r}")
            seen.add(s)
    else:
        ids = [str(i + 1) for i in range(len(rows))]

    variables = []
    for name in var_names:
        cells = [row[col[name]].strip() for row in rows]
        for i, cell in enumerate(cells):
            if cell in MISSING_TOKENS:
                raise DataError(f"missing value at ({i + 1}, {name})")
        if name in schema.categorical:
            kind = CATEGORICAL
        elif name in schema.continuous:
            kind = CONTINUOUS
        else:
            kind = CONTINUOUS if all(_is_number(c) for c in cells) else CATEGORICAL
        if kind == CATEGORICAL:
            variables.append(Variable.categorical(name, cells))
        else:
            try:
                variables.append(Variable.continuous(name, [float(c) for c in cells]))
            except ValueError:
                raise DataError(f"variable {name!r} forced continuous but has non-numeric cells") from None

    return Dataset(Y=Y, response_names=tuple(responses), sample_ids=tuple(ids),
                   variables=tuple(variables))


def save_dataset(d: Dataset, path) -> None:
    """Write ``d`` as CSV with an ``id`` column; floats use shortest round-trip repr."""
    path = Path(path)
    header = ["id"] + [v.name for v in d.variables] + list(d.response_names)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(d.n):
            row = [d.sample_ids[i]]
            for v in d.variables:
                x = v.values[i]
                row.append(repr(float(x)) if not v.spec.is_categorical else str(x))
            row.extend(repr(float(y)) for y in d.Y[i])
            w.writerow(row)


def dataset_schema(d: Dataset) -> Schema:
    """Schema that reloads a file written by :func:`save_dataset` with identical kinds."""
    return Schema(
        responses=list(d.response_names),
        variables=[v.name for v in d.variables],
        id_column="id",
        categorical=[v.name for v in d.variables if v.spec.is_categorical],
        continuous=[v.name for v in d.variables if not v.spec.is_categorical],
    )


@dataclass(frozen=True)
class ValidationReport:
    zero_variance_responses: tuple[str, ...]
    constant_variables: tuple[str, ...]
    level_counts: dict = field(default_factory=dict)
    cell_counts: dict = field(default_factory=dict)
    empty_levels: tuple[tuple[str, str], ...] = ()

    @property
    def balanced(self) -> bool:
        counts = list(self.cell_counts.values())
        return bool(counts) and min(counts) == max(counts) and not self.empty_levels

    def lines(self) -> list[str]:
        out = []
        if self.zero_variance_responses:
            out.append("zero-variance responses: " + ", ".join(self.zero_variance_responses))
        if self.constant_variables:
            out.append("constant variables: " + ", ".join(self.constant_variables))
        for var, lev in self.empty_levels:
            out.append(f"empty level: {var}={lev}")
        for var, counts in self.level_counts.items():
            out.append(f"{var}: " + ", ".join(f"{k}={c}" for k, c in counts.items()))
        if self.cell_counts:
            out.append("balanced design" if self.balanced else "unbalanced design")
        return out


def validate_dataset(d: Dataset) -> ValidationReport:
    span = d.Y.max(axis=0) - d.Y.min(axis=0)
    zero_var = tuple(name for name, s in zip(d.response_names, span) if s == 0)

    constant = []
    level_counts = {}
    empty = []
    factors = []
    for v in d.variables:
        if v.spec.is_categorical:
            factors.append(v)
            counts = {lev: int(np.sum(v.values == lev)) for lev in v.spec.levels}
            level_counts[v.name] = counts
            empty.extend((v.name, lev) for lev, c in counts.items() if c == 0)
            if sum(c > 0 for c in counts.values()) < 2:
                constant.append(v.name)
        elif np.ptp(v.values) == 0:
            constant.append(v.name)

    cells = {}
    if factors:
        keys = list(zip(*(v.values.tolist() for v in factors)))
        grids = np.meshgrid(*[np.arange(len(v.spec.levels)) for v in factors], indexing="ij")
        for idx in zip(*(g.ravel() for g in grids)):
            cell = tuple(v.spec.levels[k] for v, k in zip(factors, idx))
            cells[cell] = 0
        for key in keys:
            cells[key] += 1

    return ValidationReport(
        zero_variance_responses=zero_var,
        constant_variables=tuple(constant),
        level_counts=level_counts,
        cell_counts=cells,
        empty_levels=tuple(empty),
    )
