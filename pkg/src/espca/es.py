"""Evolution Strategies training of the transform stack.

One generation: draw P Gaussian perturbations and one shared minibatch,
transform the minibatch under every perturbed parameter vector, run PCA on
each result, and step along the objective-weighted average of the noise.

In ``global`` mode every parameter follows the sum of the top-k eigenvalues
divided by p. In ``partial`` mode the parameters of net l follow variable
l's own contribution to those eigenvalues, using the same noise draws.
"""
import logging
import time
import warnings
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import accel
from .errors import ConfigError, NumericalWarning
from .pca import explained_variance_validation, fit_pca

log = logging.getLogger(__name__)

OBJECTIVES = ("global", "partial")


@dataclass(frozen=True)
class EsConfig:
    generations: int = 100
    learning_rate: float = 1e-2
    noise_std: float = 1e-2
    population: int = 200
    k: int = 1
    batch_size: int = 128
    objective: str = "global"
    pca_refresh: int = 1
    seed: int = 0
    center_fitness: bool = False

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.generations < 0:
            raise ConfigError("generations must be >= 0")
        for name in ("learning_rate", "noise_std"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.population < 2:
            raise ConfigError("population must be >= 2")
        for name in ("k", "batch_size", "pca_refresh"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    def check(self, p, n_train):
        if not self.k < p:
            raise ConfigError(f"k={self.k} must be smaller than the number of variables p={p}")
        if self.batch_size > n_train:
            raise ConfigError(f"batch_size={self.batch_size} exceeds the {n_train} training rows")

    def replace(self, **changes):
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    @classmethod
    def from_file(cls, path, **overrides):
        """Read ``key = value`` lines; ``#`` starts a comment."""
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, raw = (s.strip() for s in line.split("=", 1))
                key = key.replace("-", "_")
                if key not in types:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = _coerce(types[key], raw, f"{path}:{lineno}")
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def to_dict(self):
        return asdict(self)


def _coerce(typ, raw, where):
    name = typ if isinstance(typ, str) else typ.__name__
    try:
        if name == "bool":
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return {"int": int, "float": float, "str": str}[name](raw)
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {name}") from None


@dataclass
class GenerationReport:
    generation: int
    train_objective: float
    train_proportion: float
    validation_proportion: float
    duration: float = 0.0
    dropped: int = 0

    def to_dict(self, timing=False):
        d = {
            "generation": self.generation,
            "train_objective": self.train_objective,
            "train_proportion": self.train_proportion,
            "validation_proportion": self.validation_proportion,
            "dropped": self.dropped,
        }
        if timing:
            d["duration"] = self.duration
        return d


def sample_noise(P, dim, rng):
    return rng.standard_normal((P, dim))


def evaluate_candidates(stack, thetas, U_batch, basis=None):
    """Eigenvalues (P, p) and contribution matrices (P, p, p) for a population.

    With ``basis`` given, the PCA is not refitted: each candidate's
    covariance is measured along the fixed rows of ``basis``. Candidates
    whose transform produced non-finite values come back as NaN.
    """
    T = stack.forward(np.atleast_2d(thetas), U_batch)
    bad = ~np.isfinite(T).all(axis=(1, 2))
    if bad.any():
        T[bad] = 0.0
    if basis is None:
        lam, W, S = accel.pca_population(T)
    else:
        S = accel.standardized_covariance(np.ascontiguousarray(T))
        W = np.broadcast_to(basis, S.shape)
        lam = accel.rayleigh_population(W, S)
    C = accel.contributions_population(W, S)
    if bad.any():
        lam[bad] = np.nan
        C[bad] = np.nan
    return lam, C


def evaluate_candidate(stack, theta, U_batch, basis=None):
    lam, C = evaluate_candidates(stack, theta[None, :], U_batch, basis)
    return lam[0], C[0]


def objectives(lam, C, k):
    """Global (P,) and partial (P, p) objective values."""
    return lam[:, :k].sum(axis=1), C[:, :k, :].sum(axis=1)


def _weights(F, center):
    ok = np.isfinite(F)
    dropped = int((~ok).sum())
    if dropped:
        warnings.warn(f"dropped {dropped} non-finite candidate objective(s)", NumericalWarning, stacklevel=3)
    w = np.where(ok, F, 0.0)
    n_ok = int(ok.sum())
    if center and n_ok:
        w = np.where(ok, w - w[ok].mean(), 0.0)
    return w, n_ok


def es_step_global(theta, F, eps, cfg, p):
    """``theta + alpha / (p P sigma) * sum_i F_i eps_i`` over finite F_i."""
    w, n_ok = _weights(np.asarray(F, dtype=float), cfg.center_fitness)
    if n_ok == 0:
        return theta.copy()
    return theta + cfg.learning_rate / (p * n_ok * cfg.noise_std) * (w @ eps)


def es_step_partial(theta, F, eps, cfg, segments):
    """Update each net's segment from its own objective column ``F[:, l]``.

    No 1/p factor: each per-variable objective is already about a p-th of
    the global one.
    """
    F = np.asarray(F, dtype=float)
    new = theta.copy()
    for l, seg in enumerate(segments):
        w, n_ok = _weights(F[:, l], cfg.center_fitness)
        if n_ok:
            new[seg] += cfg.learning_rate / (n_ok * cfg.noise_std) * (w @ eps[:, seg])
    return new


def evaluate_full(stack, theta, U_train, U_val, k):
    """Fit PCA on the transformed training set; score train and validation."""
    T_train = stack.forward(theta, U_train)
    if not np.isfinite(T_train).all():
        return np.nan, np.nan, np.nan, None
    model = fit_pca(T_train)
    obj = float(model.eigenvalues[:k].sum())
    prop = float(obj / model.total_variance) if model.total_variance > 0 else 0.0
    val = np.nan
    if U_val is not None and len(U_val) >= 2:
        T_val = stack.forward(theta, U_val)
        if np.isfinite(T_val).all():
            val = explained_variance_validation(model, T_val, k)
    return obj, prop, val, model


def train(stack, theta, U_train, U_val, cfg, callback=None):
    """Run ``cfg.generations`` ES generations from ``theta``.

    Returns the final parameters and one GenerationReport per generation.
    """
    cfg.check(stack.p, len(U_train))
    rng = np.random.default_rng(cfg.seed)
    theta = np.array(theta, dtype=float, copy=True)
    segments = stack.segments()
    partial = cfg.objective == "partial"
    basis = None
    history = []
    for t in range(cfg.generations):
        start = time.perf_counter()
        eps = sample_noise(cfg.population, stack.n_params, rng)
        batch = U_train[rng.choice(len(U_train), cfg.batch_size, replace=False)]

        if cfg.pca_refresh > 1 and t % cfg.pca_refresh == 0:
            _, W_center, _ = accel.pca_population(stack.forward(theta[None, :], batch))
            basis = W_center[0]
        use_cache = cfg.pca_refresh > 1 and t % cfg.pca_refresh != 0

        lam, C = evaluate_candidates(stack, theta + cfg.noise_std * eps, batch, basis if use_cache else None)
        F_global, F_partial = objectives(lam, C, cfg.k)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NumericalWarning)
            if partial:
                theta = es_step_partial(theta, F_partial, eps, cfg, segments)
            else:
                theta = es_step_global(theta, F_global, eps, cfg, stack.p)
        dropped = int((~np.isfinite(F_global)).sum())
        if dropped:
            log.warning("generation %d: dropped %d non-finite candidate(s)", t, dropped)

        obj, prop, val, _ = evaluate_full(stack, theta, U_train, U_val, cfg.k)
        report = GenerationReport(t, obj, prop, val, time.perf_counter() - start, dropped)
        history.append(report)
        log.debug("gen %d train %.4f val %.4f", t, prop, val)
        if callback is not None:
            callback(report)
    return theta, history
