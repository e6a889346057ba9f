"""Repeated seeded experiments over all methods, aggregation and output files.

Repeat ``r`` uses seed ``base_seed + r`` for its train/validation split,
network initialization, ES noise and GP randomness. Built-in synthetic
datasets are generated once from ``base_seed`` and shared by all repeats.
"""
import csv
import io
import json
import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import baselines, gp
from .data import SYNTHETIC, load_table, make_dataset, split
from .errors import ConfigError
from .es import EsConfig, GenerationReport, evaluate_full, train
from .gp import GpConfig
from .transforms import Encoder, build_stack

log = logging.getLogger(__name__)

METHODS = ("pca", "kpca", "es-global", "es-partial", "gp")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    schema: str = None
    methods: tuple = ("pca",)
    k: int = 1
    repeats: int = 15
    seed: int = 0
    out: str = None
    es: EsConfig = field(default_factory=EsConfig)
    gp: GpConfig = field(default_factory=GpConfig)
    workers: int = 1

    def __post_init__(self):
        methods = []
        for m in self.methods:
            m = m.strip().lower()
            if m == "es":
                m = f"es-{self.es.objective}"
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; valid methods are {', '.join(METHODS)} (or es)")
            if m not in methods:
                methods.append(m)
        if not methods:
            raise ConfigError(f"no methods given; valid methods are {', '.join(METHODS)}")
        object.__setattr__(self, "methods", tuple(methods))
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def dataset_name(self):
        if self.dataset in SYNTHETIC:
            return self.dataset
        return os.path.splitext(os.path.basename(self.dataset))[0]

    def to_dict(self):
        d = asdict(self)
        d["methods"] = list(self.methods)
        d.pop("out")
        d.pop("workers")
        return d


@dataclass
class RunRecord:
    method: str
    seed: int
    repeat: int
    k: int
    proportion: float
    proportions: dict
    history: list = field(default_factory=list)
    kernel: str = None
    expressions: list = None

    def to_dict(self):
        d = asdict(self)
        d["history"] = [h.to_dict() if isinstance(h, GenerationReport) else h for h in self.history]
        d["proportions"] = {str(k): v for k, v in self.proportions.items()}
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["proportions"] = {int(k): v for k, v in d["proportions"].items()}
        d["history"] = [GenerationReport(**h) for h in d.get("history", [])]
        return cls(**d)


def load_dataset(cfg):
    if cfg.dataset in SYNTHETIC:
        return make_dataset(cfg.dataset, cfg.seed)
    if cfg.schema is None:
        raise ConfigError(f"{cfg.dataset!r} is not a built-in dataset and no --schema was given")
    return load_table(cfg.dataset, cfg.schema)


def _check(cfg, table):
    p = table.p
    if cfg.k >= p:
        raise ConfigError(f"k={cfg.k} must be smaller than the number of variables ({p}) in {cfg.dataset_name}")
    if "gp" in cfg.methods and not table.all_numerical:
        raise ConfigError("gp only supports all-numerical datasets")
    if any(m.startswith("es-") for m in cfg.methods):
        n_train = math.floor(0.75 * table.n)
        cfg.es.replace(k=cfg.k).check(p, n_train)


def _run_method(method, table, sp, cfg, seed, repeat):
    k = cfg.k
    if method == "pca":
        v = baselines.linear_pca_baseline(table, sp, k)
        return RunRecord(method, seed, repeat, k, v, {k: v})

    if method == "kpca":
        best, kernel, failures = baselines.best_of_kernels(table, sp, k)
        if failures:
            log.warning("kernels skipped: %s", failures)
        return RunRecord(method, seed, repeat, k, best, {k: best}, kernel=kernel)

    if method.startswith("es-"):
        tr, va = table.take(sp.train), table.take(sp.validation)
        enc = Encoder.fit(table.schemas, tr.columns)
        U_train, U_val = enc.encode(tr.columns), enc.encode(va.columns)
        stack, theta = build_stack(table.schemas, seed)
        es_cfg = cfg.es.replace(seed=seed, k=k, objective=method[3:])
        theta, history = train(stack, theta, U_train, U_val, es_cfg)
        final = history[-1].validation_proportion if history else evaluate_full(stack, theta, U_train, U_val, k)[2]
        return RunRecord(method, seed, repeat, k, float(final), {k: float(final)}, history)

    if method == "gp":
        X = table.numeric_matrix()
        Xtr, Xva = X[sp.train], X[sp.validation]
        gp_cfg = GpConfig(**{**asdict(cfg.gp), "seed": seed})
        best, history = gp.evolve(Xtr, Xva, gp_cfg, k, table.schemas)
        final = history[-1].validation_proportion if history else gp.score_individual(best, Xtr, Xva, k)[2]
        return RunRecord(method, seed, repeat, k, final, {k: final}, history,
                         expressions=gp.expressions(best, [s.name for s in table.schemas]))

    raise ConfigError(f"unknown method {method!r}")


def _run_repeat(cfg, table, repeat):
    seed = cfg.seed + repeat
    sp = split(table, 0.75, seed)
    records = []
    for method in cfg.methods:
        log.info("repeat %d seed %d method %s", repeat, seed, method)
        records.append(_run_method(method, table, sp, cfg, seed, repeat))
    return records


def run_experiment(cfg):
    """Run every method for every repeat; returns RunRecords ordered by
    repeat then method."""
    table = load_dataset(cfg)
    _check(cfg, table)
    if cfg.out is not None:
        _probe_writable(cfg.out)
    if cfg.workers > 1 and cfg.repeats > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_run_repeat, cfg, table, r) for r in range(cfg.repeats)]
            chunks = [f.result() for f in futures]
    else:
        chunks = [_run_repeat(cfg, table, r) for r in range(cfg.repeats)]
    return [rec for chunk in chunks for rec in chunk]


# ---------------------------------------------------------------------------
# aggregation


def nearest_rank(values, q):
    """Nearest-rank percentile ``q`` in (0, 100] of ``values``."""
    s = sorted(values)
    if not s:
        raise ConfigError("no values to summarize")
    rank = max(1, math.ceil(q / 100.0 * len(s)))
    return s[rank - 1]


def _stats(values):
    values = [v for v in values if v is not None and not (isinstance(v, float) and math.isnan(v))]
    if not values:
        return {"mean": None, "median": None, "p20": None, "p80": None, "n": 0}
    return {
        "mean": float(np.mean(values)),
        "median": nearest_rank(values, 50),
        "p20": nearest_rank(values, 20),
        "p80": nearest_rank(values, 80),
        "n": len(values),
    }


def aggregate(records):
    """Per-method summary of final proportions and per-generation curves.

    Histories of different lengths are cut to the shortest one and the
    method is flagged ``truncated``.
    """
    by_method = {}
    for rec in records:
        by_method.setdefault(rec.method, []).append(rec)
    summary = {}
    for method in [m for m in METHODS if m in by_method]:
        recs = by_method[method]
        entry = {"final": _stats([r.proportion for r in recs]), "curves": [], "truncated": False}
        kernels = [r.kernel for r in recs if r.kernel]
        if kernels:
            entry["kernel"] = max(sorted(set(kernels)), key=kernels.count)
        lengths = {len(r.history) for r in recs}
        if lengths != {0}:
            n_gen = min(lengths)
            entry["truncated"] = len(lengths) > 1
            for g in range(n_gen):
                entry["curves"].append(_stats([r.history[g].validation_proportion for r in recs]))
        summary[method] = entry
    return summary


def relative_difference(partial, global_):
    """``100 * (partial - global) / partial``, or None when partial is 0."""
    if partial is None or global_ is None or partial == 0:
        return None
    return 100.0 * (partial - global_) / partial


# ---------------------------------------------------------------------------
# output files


def _fmt(v):
    return "" if v is None else f"{v:.6f}"


def render_table(records, dataset, k):
    summary = aggregate(records)
    methods = [m for m in METHODS if m in summary]
    header = ["dataset", "k"] + methods
    row = [dataset, str(k)] + [_fmt(summary[m]["final"]["mean"]) for m in methods]
    if "kpca" in summary:
        header.append("kpca_kernel")
        row.append(summary["kpca"].get("kernel", ""))
    if "es-global" in summary and "es-partial" in summary:
        header.append("relative_difference")
        row.append(_fmt(relative_difference(summary["es-partial"]["final"]["mean"],
                                            summary["es-global"]["final"]["mean"])))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerow(row)
    return buf.getvalue()


def render_curves(records):
    summary = aggregate(records)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["generation", "method", "median", "p20", "p80"])
    for method, entry in summary.items():
        for g, st in enumerate(entry["curves"]):
            w.writerow([g, method, _fmt(st["median"]), _fmt(st["p20"]), _fmt(st["p80"])])
    return buf.getvalue()


def render_results(cfg, records):
    payload = {
        "dataset": cfg.dataset_name,
        "k": cfg.k,
        "config": cfg.to_dict(),
        "records": [r.to_dict() for r in records],
        "summary": aggregate(records),
    }
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n"


def table_from_results(text):
    """Rebuild ``table.csv`` content from a ``results.json`` document."""
    payload = json.loads(text)
    records = [RunRecord.from_dict(r) for r in payload["records"]]
    return render_table(records, payload["dataset"], payload["k"])


def _probe_writable(directory):
    os.makedirs(directory, exist_ok=True)
    fd, path = tempfile.mkstemp(dir=directory, prefix=".probe-")
    os.close(fd)
    os.remove(path)


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def emit_outputs(cfg, records, directory):
    """Write results.json, table.csv, curves.csv and, for gp, expressions.txt."""
    if not records:
        raise ConfigError("no records to write")
    _probe_writable(directory)
    files = {
        "results.json": render_results(cfg, records),
        "table.csv": render_table(records, cfg.dataset_name, cfg.k),
        "curves.csv": render_curves(records),
    }
    gp_recs = [r for r in records if r.method == "gp"]
    if gp_recs:
        lines = []
        for r in gp_recs:
            lines.append(f"# seed {r.seed}")
            lines.extend(r.expressions or [])
        files["expressions.txt"] = "\n".join(lines) + "\n"
    paths = []
    for name, text in files.items():
        path = os.path.join(directory, name)
        _atomic_write(path, text)
        paths.append(path)
    return paths
