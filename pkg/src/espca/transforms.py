"""Per-variable networks mapping each original column to one transformed column.

Numerical and ordinal columns feed a scalar into their network; categorical
columns feed a one-hot vector. Every network has one hidden ReLU layer and a
scalar output, and all parameters live in one flat vector so ES can perturb
them jointly.
"""
from dataclasses import dataclass, field

import numpy as np

from . import accel
from .errors import ConfigError, InvalidDataError, ShapeError, UnknownLevelError

NUMERICAL = "numerical"
CATEGORICAL = "categorical"
ORDINAL = "ordinal"
KINDS = (NUMERICAL, CATEGORICAL, ORDINAL)

HIDDEN = 64


@dataclass(frozen=True)
class VariableSchema:
    name: str
    kind: str = NUMERICAL
    levels: tuple = ()
    is_label: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"column {self.name!r}: unknown kind {self.kind!r}")
        object.__setattr__(self, "levels", tuple(self.levels))
        if self.kind != NUMERICAL:
            if not self.levels:
                raise ConfigError(f"column {self.name!r}: {self.kind} column needs levels")
            if len(set(self.levels)) != len(self.levels):
                raise ConfigError(f"column {self.name!r}: duplicate levels")

    @property
    def input_width(self):
        return len(self.levels) if self.kind == CATEGORICAL else 1

    def code(self, value):
        """Index of ``value`` in the level list."""
        try:
            return self.levels.index(value)
        except ValueError:
            raise UnknownLevelError(self.name, value) from None


def net_param_count(input_width, hidden=HIDDEN):
    return input_width * hidden + hidden + hidden + 1


@dataclass(frozen=True)
class TransformStack:
    schemas: tuple
    hidden: int = HIDDEN
    in_off: np.ndarray = field(init=False, repr=False)
    par_off: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "schemas", tuple(self.schemas))
        widths = [s.input_width for s in self.schemas]
        counts = [net_param_count(w, self.hidden) for w in widths]
        object.__setattr__(self, "in_off", np.concatenate([[0], np.cumsum(widths)]).astype(np.int64))
        object.__setattr__(self, "par_off", np.concatenate([[0], np.cumsum(counts)]).astype(np.int64))

    @property
    def p(self):
        return len(self.schemas)

    @property
    def n_params(self):
        return int(self.par_off[-1])

    @property
    def input_dim(self):
        return int(self.in_off[-1])

    def segment(self, l):
        return slice(int(self.par_off[l]), int(self.par_off[l + 1]))

    def segments(self):
        return [self.segment(l) for l in range(self.p)]

    def init_params(self, rng):
        """Fan-in scaled normal init for weights and biases of every net."""
        H = self.hidden
        parts = []
        for s in self.schemas:
            d = s.input_width
            parts += [
                rng.standard_normal(d * H) / np.sqrt(d),
                rng.standard_normal(H) / np.sqrt(d),
                rng.standard_normal(H) / np.sqrt(H),
                rng.standard_normal(1) / np.sqrt(H),
            ]
        return np.concatenate(parts)

    def forward(self, theta, U):
        """Transform an encoded batch.

        ``theta`` of shape (D,) gives an (m, p) result; shape (P, D) gives
        (P, m, p), one slice per candidate.
        """
        theta = np.asarray(theta, dtype=float)
        U = np.ascontiguousarray(U, dtype=float)
        single = theta.ndim == 1
        theta2 = np.ascontiguousarray(np.atleast_2d(theta))
        if theta2.shape[1] != self.n_params:
            raise ShapeError(f"parameter vector has length {theta2.shape[1]}, stack needs {self.n_params}")
        if U.ndim != 2 or U.shape[1] != self.input_dim:
            raise ShapeError(f"encoded batch must have {self.input_dim} columns, got shape {U.shape}")
        out = accel.forward_population(theta2, U, self.in_off, self.par_off, self.hidden)
        return out[0] if single else out


def build_stack(schemas, seed, hidden=HIDDEN):
    """Create a stack for ``schemas`` and its initial parameter vector."""
    schemas = [s for s in schemas if not s.is_label]
    if len(schemas) < 2:
        raise ConfigError(f"need at least 2 variables for a transform stack, got {len(schemas)}")
    stack = TransformStack(tuple(schemas), hidden)
    theta = stack.init_params(np.random.default_rng(seed))
    return stack, theta


def forward(stack, theta, U):
    return stack.forward(theta, U)


class Encoder:
    """Turns raw column values into network inputs.

    Numerical columns are standardized with statistics from the rows the
    encoder was fitted on. Ordinal ranks are mapped evenly onto [0, 1] and
    then standardized the same way. Categorical columns become one-hot
    vectors over the schema's full level list.
    """

    def __init__(self, schemas, means, stds):
        self.schemas = tuple(schemas)
        self.means = np.asarray(means, dtype=float)
        self.stds = np.asarray(stds, dtype=float)
        widths = [s.input_width for s in self.schemas]
        self.in_off = np.concatenate([[0], np.cumsum(widths)]).astype(np.int64)

    @classmethod
    def fit(cls, schemas, columns):
        """``columns`` holds one array per schema: floats for numerical,
        integer level codes otherwise."""
        means, stds = [], []
        for s, col in zip(schemas, columns):
            if s.kind == CATEGORICAL:
                means.append(0.0)
                stds.append(1.0)
                continue
            v = _scalar_values(s, col)
            sd = v.std(ddof=1) if v.size > 1 else 0.0
            means.append(v.mean())
            stds.append(sd if sd > 1e-12 else 1.0)
        return cls(schemas, means, stds)

    def encode(self, columns):
        m = len(columns[0]) if columns else 0
        U = np.zeros((m, int(self.in_off[-1])))
        for l, (s, col) in enumerate(zip(self.schemas, columns)):
            a = self.in_off[l]
            if s.kind == CATEGORICAL:
                codes = np.asarray(col, dtype=np.int64)
                if codes.size and (codes.min() < 0 or codes.max() >= len(s.levels)):
                    raise UnknownLevelError(s.name, int(codes.max()))
                U[np.arange(m), a + codes] = 1.0
            else:
                U[:, a] = (_scalar_values(s, col) - self.means[l]) / self.stds[l]
        return U

    def encode_row(self, row):
        """Encode one raw row (labels, not codes) into per-variable vectors."""
        if len(row) != len(self.schemas):
            raise ShapeError(f"row has {len(row)} values, schema has {len(self.schemas)}")
        out = []
        for l, (s, value) in enumerate(zip(self.schemas, row)):
            if s.kind == CATEGORICAL:
                vec = np.zeros(len(s.levels))
                vec[s.code(value)] = 1.0
            elif s.kind == ORDINAL:
                x = _rank_position(s, s.code(value))
                vec = np.array([(x - self.means[l]) / self.stds[l]])
            else:
                vec = np.array([(float(value) - self.means[l]) / self.stds[l]])
            out.append(vec)
        return out


def encode_row(encoder, row):
    return encoder.encode_row(row)


def _rank_position(schema, code):
    n = len(schema.levels)
    return code / (n - 1) if n > 1 else 0.0


def _scalar_values(schema, col):
    if schema.kind == ORDINAL:
        codes = np.asarray(col, dtype=float)
        n = len(schema.levels)
        return codes / (n - 1) if n > 1 else np.zeros_like(codes)
    v = np.asarray(col, dtype=float)
    if not np.isfinite(v).all():
        raise InvalidDataError(f"column {schema.name!r} has non-finite values")
    return v


def level_coordinates(stack, theta, model, U, codes, schema_index):
    """Center of gravity of the projected scores for each level of a
    categorical variable.

    Returns a dict ``level -> score vector`` and the list of levels that had
    no rows (those are left out of the dict).
    """
    from .pca import project

    schema = stack.schemas[schema_index]
    if schema.kind != CATEGORICAL:
        raise ConfigError(f"column {schema.name!r} is not categorical")
    Z = project(model, stack.forward(theta, U))
    codes = np.asarray(codes, dtype=np.int64)
    coords, empty = {}, []
    for i, level in enumerate(schema.levels):
        mask = codes == i
        if mask.any():
            coords[level] = Z[mask].mean(axis=0)
        else:
            empty.append(level)
    return coords, empty
