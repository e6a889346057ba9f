"""Genetic programming over per-variable expression trees.

An individual holds one tree per variable; tree l only ever reads column l.
Trees are stored in prefix order as parallel ``ops``/``vals`` tuples so the
evaluator can run them as flat arrays (see ``accel.eval_forest``).

Reproduction is generational. The individual that is best for each
variable's partial objective, and the best one by the global objective, are
copied unchanged into the next generation; every other slot is bred
variable by variable from tournament winners.
"""
import logging
from dataclasses import dataclass

import numpy as np

from . import accel
from .accel import OP_ADD, OP_CONST, OP_COS, OP_MUL, OP_SIN, OP_SUB, OP_VAR
from .errors import ConfigError, UnsupportedSchemaError
from .es import GenerationReport
from .pca import explained_variance_validation, fit_pca
from .transforms import NUMERICAL

log = logging.getLogger(__name__)

ARITY = {OP_VAR: 0, OP_CONST: 0, OP_ADD: 2, OP_SUB: 2, OP_MUL: 2, OP_COS: 1, OP_SIN: 1}
FUNCTIONS = (OP_SUB, OP_ADD, OP_MUL, OP_COS, OP_SIN)
BINARY = (OP_ADD, OP_SUB, OP_MUL)
UNARY = (OP_COS, OP_SIN)
SYMBOL = {OP_ADD: "+", OP_SUB: "-", OP_MUL: "*", OP_COS: "cos", OP_SIN: "sin"}


@dataclass(frozen=True)
class GpConfig:
    crossover_rate: float = 0.8
    subtree_mutation_rate: float = 0.2
    operator_mutation_rate: float = 0.2
    population: int = 1000
    generations: int = 100
    min_depth: int = 2
    max_depth: int = 7
    tournament_size: int = 7
    seed: int = 0

    def __post_init__(self):
        for name in ("crossover_rate", "subtree_mutation_rate", "operator_mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if not 2 <= self.min_depth <= self.max_depth:
            raise ConfigError("need 2 <= min_depth <= max_depth")
        if self.population < 2 or self.tournament_size < 1 or self.generations < 0:
            raise ConfigError("population >= 2, tournament_size >= 1 and generations >= 0 required")


@dataclass(frozen=True)
class Tree:
    ops: tuple
    vals: tuple

    def __len__(self):
        return len(self.ops)

    @property
    def depth(self):
        return int(max(node_depths(self.ops)))


@dataclass
class GpIndividual:
    trees: list
    fitness: np.ndarray = None  # per-variable partial objective
    global_fitness: float = float("nan")


# ---------------------------------------------------------------------------
# tree structure helpers


def subtree_end(ops, i):
    """Index one past the end of the subtree rooted at ``i``."""
    need = 1
    while need:
        need += ARITY[ops[i]] - 1
        i += 1
    return i


def node_depths(ops):
    """Depth of every node in prefix order; the root has depth 1."""
    depths = []
    pending = []  # depth waiting for each open child slot
    for op in ops:
        d = pending.pop() if pending else 1
        depths.append(d)
        pending.extend([d + 1] * ARITY[op])
    return depths


def _terminal(rng):
    if rng.random() < 0.5:
        return [OP_VAR], [0.0]
    return [OP_CONST], [float(rng.standard_normal())]


def _random_tree(rng, depth, full, min_depth=2):
    """Prefix lists for a tree of at most ``depth`` levels.

    ``full`` builds every branch to exactly ``depth``; otherwise each node
    below the root picks uniformly among functions and terminals.
    """
    ops, vals = [], []
    n_term, n_func = 2, len(FUNCTIONS)

    def build(level):
        if level == depth:
            o, v = _terminal(rng)
        elif level < min_depth or full or rng.random() >= n_term / (n_term + n_func):
            op = FUNCTIONS[rng.integers(len(FUNCTIONS))]
            ops.append(op)
            vals.append(0.0)
            for _ in range(ARITY[op]):
                build(level + 1)
            return
        else:
            o, v = _terminal(rng)
        ops.extend(o)
        vals.extend(v)

    build(1)
    return ops, vals


def random_tree(rng, depth, full=False):
    ops, vals = _random_tree(rng, depth, full)
    return Tree(tuple(ops), tuple(vals))


def truncate(tree, max_depth):
    """Replace every function node sitting at ``max_depth`` with a variable
    terminal so the tree fits."""
    depths = node_depths(tree.ops)
    if max(depths) <= max_depth:
        return tree
    ops, vals = [], []
    i = 0
    while i < len(tree.ops):
        if depths[i] == max_depth and ARITY[tree.ops[i]] > 0:
            ops.append(OP_VAR)
            vals.append(0.0)
            i = subtree_end(tree.ops, i)
        else:
            ops.append(tree.ops[i])
            vals.append(tree.vals[i])
            i += 1
    return Tree(tuple(ops), tuple(vals))


def _splice(tree, i, j, donor, di, dj):
    return Tree(
        tree.ops[:i] + donor.ops[di:dj] + tree.ops[j:],
        tree.vals[:i] + donor.vals[di:dj] + tree.vals[j:],
    )


# ---------------------------------------------------------------------------
# operators


def init_population(cfg, schemas, rng):
    """Ramped half-and-half over depths ``min_depth..max_depth``."""
    bad = [s.name for s in schemas if s.kind != NUMERICAL]
    if bad:
        raise UnsupportedSchemaError(f"GP only supports numerical columns; got non-numerical {bad}")
    ramp = cfg.max_depth - cfg.min_depth + 1
    pop = []
    for i in range(cfg.population):
        depth = cfg.min_depth + i % ramp
        full = (i // ramp) % 2 == 0
        pop.append(GpIndividual([random_tree(rng, depth, full) for _ in schemas]))
    return pop


def eval_tree(tree, x):
    """Evaluate ``tree`` pointwise on column values ``x``.

    Non-finite outputs are replaced by 0; the second return value says
    whether that happened.
    """
    x = np.ascontiguousarray(x, dtype=float)
    with np.errstate(all="ignore"):
        y = accel.eval_prefix(np.asarray(tree.ops, dtype=np.int64), np.asarray(tree.vals, dtype=float), x)
    bad = ~np.isfinite(y)
    if bad.any():
        y[bad] = 0.0
    return y, bool(bad.any())


def transform_matrix(trees_per_individual, X):
    """Evaluate a list of individuals' trees; returns (N, n, p)."""
    N = len(trees_per_individual)
    p = X.shape[1]
    ops, vals, starts, cols = [], [], [0], []
    for trees in trees_per_individual:
        for l, t in enumerate(trees):
            ops.extend(t.ops)
            vals.extend(t.vals)
            starts.append(len(ops))
            cols.append(l)
    with np.errstate(all="ignore"):
        out = accel.eval_forest(
            np.asarray(ops, dtype=np.int64),
            np.asarray(vals, dtype=float),
            np.asarray(starts, dtype=np.int64),
            np.asarray(cols, dtype=np.int64),
            np.ascontiguousarray(X, dtype=float),
        )
    out[~np.isfinite(out)] = 0.0
    return out.reshape(N, p, X.shape[0]).transpose(0, 2, 1)


def tournament_select(fitness, size, rng):
    """Index of the best of ``size`` uniform draws; ties go to the lower index."""
    fitness = np.asarray(fitness, dtype=float)
    if fitness.size == 0:
        raise ConfigError("cannot select from an empty population")
    picks = rng.integers(0, fitness.size, size)
    f = np.where(np.isnan(fitness[picks]), -np.inf, fitness[picks])
    best = f.max()
    return int(picks[f == best].min())


def crossover(a, b, rng, max_depth=7):
    """Swap a random subtree of ``a`` with a random subtree of ``b``.

    Both parents must be trees for the same variable. Offspring deeper than
    ``max_depth`` are truncated; an offspring that shrinks to a bare
    terminal is replaced by its parent.
    """
    i = int(rng.integers(len(a)))
    j = int(rng.integers(len(b)))
    ie, je = subtree_end(a.ops, i), subtree_end(b.ops, j)
    c1 = truncate(_splice(a, i, ie, b, j, je), max_depth)
    c2 = truncate(_splice(b, j, je, a, i, ie), max_depth)
    if len(c1) == 1:
        c1 = a
    if len(c2) == 1:
        c2 = b
    return c1, c2


def subtree_mutation(tree, rng, max_depth=7):
    i = int(rng.integers(len(tree)))
    level = node_depths(tree.ops)[i]
    room = max_depth - level + 1
    new_ops, new_vals = _random_tree(rng, room, full=False, min_depth=2 if i == 0 else 1)
    donor = Tree(tuple(new_ops), tuple(new_vals))
    return _splice(tree, i, subtree_end(tree.ops, i), donor, 0, len(donor))


def operator_mutation(tree, rng):
    funcs = [i for i, op in enumerate(tree.ops) if ARITY[op] > 0]
    if not funcs:
        return tree
    i = funcs[int(rng.integers(len(funcs)))]
    group = BINARY if ARITY[tree.ops[i]] == 2 else UNARY
    choices = [op for op in group if op != tree.ops[i]]
    new = choices[int(rng.integers(len(choices)))]
    return Tree(tree.ops[:i] + (new,) + tree.ops[i + 1:], tree.vals)


def mutate(tree, cfg, rng):
    if cfg.subtree_mutation_rate and rng.random() < cfg.subtree_mutation_rate:
        tree = subtree_mutation(tree, rng, cfg.max_depth)
    if cfg.operator_mutation_rate and rng.random() < cfg.operator_mutation_rate:
        tree = operator_mutation(tree, rng)
    return tree


def to_infix(tree, name="x"):
    """Readable expression, e.g. ``((2 * x) + cos(x))``."""
    def walk(i):
        op = tree.ops[i]
        if op == OP_VAR:
            return name, i + 1
        if op == OP_CONST:
            return f"{tree.vals[i]:.4g}", i + 1
        if ARITY[op] == 1:
            inner, j = walk(i + 1)
            return f"{SYMBOL[op]}({inner})", j
        left, j = walk(i + 1)
        right, j = walk(j)
        return f"({left} {SYMBOL[op]} {right})", j

    return walk(0)[0]


# ---------------------------------------------------------------------------


def evaluate_population(pop, X, k):
    T = transform_matrix([ind.trees for ind in pop], X)
    lam, W, S = accel.pca_population(T)
    C = accel.contributions_population(W, S)
    F_partial = C[:, :k, :].sum(axis=1)
    F_global = lam[:, :k].sum(axis=1)
    for ind, fp, fg in zip(pop, F_partial, F_global):
        ind.fitness = fp
        ind.global_fitness = float(fg)
    return F_partial, F_global


def score_individual(ind, X_train, X_val, k):
    """Train objective, train proportion and validation proportion."""
    T_train = transform_matrix([ind.trees], X_train)[0]
    model = fit_pca(T_train)
    obj = float(model.eigenvalues[:k].sum())
    prop = obj / model.total_variance if model.total_variance > 0 else 0.0
    val = float("nan")
    if X_val is not None and len(X_val) >= 2:
        val = explained_variance_validation(model, transform_matrix([ind.trees], X_val)[0], k)
    return obj, float(prop), float(val)


def _copy(ind):
    return GpIndividual(list(ind.trees), None if ind.fitness is None else ind.fitness.copy(), ind.global_fitness)


def evolve(X_train, X_val, cfg, k, schemas=None, callback=None):
    """Evolve per-variable trees maximizing each variable's partial objective.

    Returns the individual with the best global objective seen so far
    (the initial population included) and one GenerationReport per
    completed generation, so ``generations=0`` gives an empty history.
    """
    X_train = np.asarray(X_train, dtype=float)
    p = X_train.shape[1]
    if not 1 <= k < p:
        raise ConfigError(f"k={k} must satisfy 1 <= k < p={p}")
    if schemas is None:
        from .transforms import VariableSchema
        schemas = [VariableSchema(f"x{j + 1}") for j in range(p)]
    rng = np.random.default_rng(cfg.seed)
    pop = init_population(cfg, schemas, rng)
    best = None
    history = []
    for gen in range(cfg.generations + 1):
        F_partial, F_global = evaluate_population(pop, X_train, k)
        g = int(np.argmax(np.where(np.isnan(F_global), -np.inf, F_global)))
        if best is None or F_global[g] > best.global_fitness:
            best = _copy(pop[g])
        if gen > 0:
            obj, prop, val = score_individual(best, X_train, X_val, k)
            report = GenerationReport(gen - 1, obj, prop, val)
            history.append(report)
            log.debug("gp gen %d best global %.4f val %.4f", gen - 1, prop, val)
            if callback is not None:
                callback(report)
        if gen == cfg.generations:
            break

        elite = []
        for l in range(p):
            idx = int(np.argmax(np.where(np.isnan(F_partial[:, l]), -np.inf, F_partial[:, l])))
            if idx not in elite:
                elite.append(idx)
        if g not in elite:
            elite.append(g)
        nxt = [_copy(pop[i]) for i in elite]
        while len(nxt) < cfg.population:
            kids = ([], [])
            for l in range(p):
                a = pop[tournament_select(F_partial[:, l], cfg.tournament_size, rng)].trees[l]
                b = pop[tournament_select(F_partial[:, l], cfg.tournament_size, rng)].trees[l]
                if rng.random() < cfg.crossover_rate:
                    a, b = crossover(a, b, rng, cfg.max_depth)
                kids[0].append(mutate(a, cfg, rng))
                kids[1].append(mutate(b, cfg, rng))
            nxt.append(GpIndividual(kids[0]))
            if len(nxt) < cfg.population:
                nxt.append(GpIndividual(kids[1]))
        pop = nxt
    return best, history


def expressions(ind, names=None):
    names = names or [f"x{j + 1}" for j in range(len(ind.trees))]
    return [to_infix(t, nm) for t, nm in zip(ind.trees, names)]


def depth_histogram(pop):
    counts = {}
    for ind in pop:
        for t in ind.trees:
            counts[t.depth] = counts.get(t.depth, 0) + 1
    return dict(sorted(counts.items()))


__all__ = [
    "GpConfig", "Tree", "GpIndividual", "init_population", "eval_tree", "tournament_select",
    "crossover", "mutate", "subtree_mutation", "operator_mutation", "evolve", "to_infix",
    "expressions", "node_depths", "subtree_end", "truncate", "random_tree", "depth_histogram",
]
