"""Synthetic datasets, delimited-file loading with a schema sidecar, and splits.

Schema sidecar: a JSON list with one object per file column, in header
order::

    [{"name": "age", "kind": "numerical"},
     {"name": "housing", "kind": "categorical", "levels": ["own", "rent", "free"]},
     {"name": "grade", "kind": "ordinal", "levels": ["low", "mid", "high"]},
     {"name": "class", "kind": "categorical", "levels": ["good", "bad"], "is_label": true}]

Ordinal ``levels`` are listed from lowest to highest rank (``ranks`` is
accepted as an alias). Level sets are closed: a file value outside the
schema is an error, and levels that never occur still get a one-hot slot.
"""
import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataLoadError, InsufficientRowsError, UnknownLevelError
from .transforms import CATEGORICAL, NUMERICAL, VariableSchema

MIN_ROWS = 4


@dataclass
class DataTable:
    """Columns aligned with ``schemas``: float arrays for numerical columns,
    integer level codes for categorical and ordinal ones. The optional label
    column never enters the transforms."""

    schemas: tuple
    columns: list
    label: np.ndarray = None
    label_name: str = None

    def __post_init__(self):
        self.schemas = tuple(self.schemas)
        if len(self.columns) != len(self.schemas):
            raise ConfigError("one column per schema required")
        lengths = {len(c) for c in self.columns}
        if len(lengths) > 1:
            raise ConfigError(f"columns have unequal lengths {sorted(lengths)}")

    @property
    def n(self):
        return len(self.columns[0]) if self.columns else 0

    @property
    def p(self):
        return len(self.schemas)

    @property
    def all_numerical(self):
        return all(s.kind == NUMERICAL for s in self.schemas)

    def take(self, idx):
        idx = np.asarray(idx)
        label = None if self.label is None else self.label[idx]
        return DataTable(self.schemas, [c[idx] for c in self.columns], label, self.label_name)

    def numeric_matrix(self):
        if not self.all_numerical:
            raise ConfigError("table has non-numerical columns")
        return np.column_stack(self.columns).astype(float)

    @classmethod
    def from_matrix(cls, X, names=None, label=None):
        X = np.asarray(X, dtype=float)
        names = names or [f"x{j + 1}" for j in range(X.shape[1])]
        schemas = [VariableSchema(nm) for nm in names]
        return cls(schemas, [X[:, j].copy() for j in range(X.shape[1])], label)


@dataclass(frozen=True)
class SplitPair:
    train: np.ndarray
    validation: np.ndarray
    seed: int


# ---------------------------------------------------------------------------
# synthetic generators


def gen_circles(n=1000, factor=0.1, noise=0.1, seed=0):
    """Two concentric circles of radius 1 and ``factor`` plus Gaussian noise."""
    rng = np.random.default_rng(seed)
    n_out = n // 2
    n_in = n - n_out
    t_out = np.linspace(0, 2 * np.pi, n_out, endpoint=False)
    t_in = np.linspace(0, 2 * np.pi, n_in, endpoint=False)
    X = np.vstack([
        np.column_stack([np.cos(t_out), np.sin(t_out)]),
        factor * np.column_stack([np.cos(t_in), np.sin(t_in)]),
    ])
    y = np.r_[np.zeros(n_out, dtype=np.int64), np.ones(n_in, dtype=np.int64)]
    if noise:
        X = X + rng.normal(0.0, noise, X.shape)
    return DataTable.from_matrix(X, label=y)


def fibonacci_sphere(n, radius=1.0):
    """``n`` near-uniform points on a sphere via the golden-angle spiral."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = np.pi * (3.0 - math.sqrt(5.0)) * i
    return radius * np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def gen_spheres(n=1000, radii=(1.0, 0.1), noise=0.1, seed=0):
    rng = np.random.default_rng(seed)
    n_out = n // 2
    X = np.vstack([fibonacci_sphere(n_out, radii[0]), fibonacci_sphere(n - n_out, radii[1])])
    y = np.r_[np.zeros(n_out, dtype=np.int64), np.ones(n - n_out, dtype=np.int64)]
    if noise:
        X = X + rng.normal(0.0, noise, X.shape)
    return DataTable.from_matrix(X, label=y)


def gen_stripes(n=1000, noise=0.1, seed=0):
    """Stripes ``x1 = k*pi + e`` for k uniform on -4..4, with ``x2 = e``.

    The same noise draw ``e`` feeds both columns; that shared term is the
    only link between them.
    """
    rng = np.random.default_rng(seed)
    k = rng.integers(-4, 5, n)
    e = rng.normal(0.0, noise, n)
    X = np.column_stack([k * np.pi + e, e])
    return DataTable.from_matrix(X, label=k)


SYNTHETIC = {
    "circles": gen_circles,
    "spheres": gen_spheres,
    "stripes": gen_stripes,
}


def make_dataset(name, seed=0):
    try:
        gen = SYNTHETIC[name]
    except KeyError:
        raise ConfigError(f"unknown dataset {name!r}; built-ins are {sorted(SYNTHETIC)}") from None
    return gen(seed=seed)


# ---------------------------------------------------------------------------
# files


def read_schema(path):
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataLoadError(f"{path}: invalid schema JSON ({exc})") from None
    if not isinstance(raw, list):
        raise DataLoadError(f"{path}: schema must be a JSON list")
    schemas = []
    for entry in raw:
        if not isinstance(entry, dict) or "name" not in entry:
            raise DataLoadError(f"{path}: every schema entry needs a name")
        levels = entry.get("levels", entry.get("ranks", ()))
        try:
            schemas.append(VariableSchema(
                str(entry["name"]),
                entry.get("kind", NUMERICAL),
                tuple(str(v) for v in levels),
                bool(entry.get("is_label", False)),
            ))
        except ConfigError as exc:
            raise DataLoadError(f"{path}: {exc}") from None
    return schemas


def write_schema(schemas, path):
    out = []
    for s in schemas:
        entry = {"name": s.name, "kind": s.kind}
        if s.levels:
            entry["levels"] = list(s.levels)
        if s.is_label:
            entry["is_label"] = True
        out.append(entry)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=2)


def load_table(data_path, schema_path, delimiter=","):
    schemas = read_schema(schema_path)
    with open(data_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataLoadError(f"{data_path}: empty file") from None
        rows = [r for r in reader if r]

    names = [s.name for s in schemas]
    missing = [nm for nm in names if nm not in header]
    if missing:
        raise DataLoadError(f"{data_path}: missing column(s) {missing}")
    extra = [h for h in header if h not in names]
    if extra:
        raise DataLoadError(f"{data_path}: column(s) {extra} not described by the schema")
    if header != names:
        raise DataLoadError(f"{data_path}: header order {header} does not match schema order {names}")

    for i, r in enumerate(rows, start=1):
        if len(r) != len(header):
            raise DataLoadError(f"{data_path}: row {i} has {len(r)} cells, expected {len(header)}")

    features, columns = [], []
    label, label_name = None, None
    for j, s in enumerate(schemas):
        col = _parse_column(s, [r[j].strip() for r in rows], data_path)
        if s.is_label:
            label, label_name = col, s.name
        else:
            features.append(s)
            columns.append(col)
    table = DataTable(features, columns, label, label_name)
    if table.n == 0:
        raise InsufficientRowsError(f"{data_path}: no data rows")
    return table


def _parse_column(schema, cells, path):
    if schema.kind == NUMERICAL:
        out = np.empty(len(cells))
        for i, cell in enumerate(cells, start=1):
            try:
                out[i - 1] = float(cell)
            except ValueError:
                raise DataLoadError(
                    f"{path}: row {i} (line {i + 1}), column {schema.name!r}: cannot parse {cell!r} as a number"
                ) from None
            if not np.isfinite(out[i - 1]):
                raise DataLoadError(f"{path}: row {i} (line {i + 1}), column {schema.name!r}: non-finite value {cell!r}")
        return out
    codes = np.empty(len(cells), dtype=np.int64)
    for i, cell in enumerate(cells, start=1):
        try:
            codes[i - 1] = schema.code(cell)
        except UnknownLevelError:
            raise UnknownLevelError(schema.name, cell, row=i) from None
    return codes


# ---------------------------------------------------------------------------


def split(table, ratio=0.75, seed=0):
    """Shuffle rows and put ``floor(ratio * n)`` of them in the training set."""
    n = table if isinstance(table, (int, np.integer)) else table.n
    if n < MIN_ROWS:
        raise InsufficientRowsError(f"need at least {MIN_ROWS} rows to split, got {n}")
    n_train = int(math.floor(ratio * n))
    if not 1 <= n_train <= n - 1:
        raise InsufficientRowsError(f"ratio {ratio} leaves too few rows on one side of {n}")
    perm = np.random.default_rng(seed).permutation(n)
    return SplitPair(np.sort(perm[:n_train]), np.sort(perm[n_train:]), seed)


def expand_matrix(table):
    """Numeric design matrix for the baselines: one-hot for categoricals,
    rank position in [0, 1] for ordinals, raw values otherwise."""
    blocks = []
    for s, col in zip(table.schemas, table.columns):
        if s.kind == CATEGORICAL:
            block = np.zeros((table.n, len(s.levels)))
            block[np.arange(table.n), np.asarray(col, dtype=np.int64)] = 1.0
            blocks.append(block)
        elif s.kind == NUMERICAL:
            blocks.append(np.asarray(col, dtype=float)[:, None])
        else:
            k = len(s.levels)
            blocks.append((np.asarray(col, dtype=float) / max(k - 1, 1))[:, None])
    return np.hstack(blocks)
