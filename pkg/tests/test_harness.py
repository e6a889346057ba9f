import csv
import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from espca import baselines
from espca.cli import main
from espca.data import gen_stripes, split
from espca.errors import ConfigError
from espca.es import EsConfig, GenerationReport
from espca.gp import GpConfig
from espca.harness import (ExperimentConfig, RunRecord, _run_method, aggregate, emit_outputs, nearest_rank,
                           relative_difference, render_table, run_experiment, table_from_results)

FAST = dict(es=EsConfig(generations=3, population=10, batch_size=32), gp=GpConfig(population=20, generations=2))


@settings(max_examples=60, deadline=None)
@given(vals=st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40), q=st.integers(1, 100))
def test_nearest_rank_oracle(vals, q):
    s = sorted(vals)
    # smallest value with at least q% of the data at or below it
    expect = next(v for i, v in enumerate(s, 1) if i / len(s) >= q / 100.0 - 1e-12)
    assert nearest_rank(vals, q) == expect


def test_nearest_rank_examples():
    v = [15, 20, 35, 40, 50]
    assert nearest_rank(v, 50) == 35
    assert nearest_rank(v, 20) == 15
    assert nearest_rank(v, 80) == 40
    assert nearest_rank(v, 100) == 50


def test_relative_difference():
    assert relative_difference(0.153, 0.119) == pytest.approx(22.222, abs=1e-3)
    assert relative_difference(0.0, 0.1) is None


def _rec(method, seed, val, hist=None):
    h = [GenerationReport(g, 0.0, 0.0, v) for g, v in enumerate(hist or [])]
    return RunRecord(method, seed, seed, 1, val, {1: val}, h)


def test_aggregate_and_truncation():
    recs = [_rec("es-global", 0, 0.5, [0.1, 0.2, 0.5]), _rec("es-global", 1, 0.3, [0.1, 0.3]),
            _rec("pca", 0, 0.4), _rec("pca", 1, 0.6)]
    s = aggregate(recs)
    assert s["es-global"]["truncated"] and len(s["es-global"]["curves"]) == 2
    assert s["pca"]["final"]["mean"] == pytest.approx(0.5)
    assert s["pca"]["final"]["median"] == 0.4
    assert s["pca"]["curves"] == []


def test_table_has_relative_difference():
    recs = [_rec("es-global", 0, 0.119), _rec("es-partial", 0, 0.153)]
    row = list(csv.DictReader(io.StringIO(render_table(recs, "x", 1))))[0]
    assert float(row["relative_difference"]) == pytest.approx(22.222, abs=1e-3)


def test_config_errors():
    with pytest.raises(ConfigError):
        ExperimentConfig("stripes", methods=())
    with pytest.raises(ConfigError, match="valid methods"):
        ExperimentConfig("stripes", methods=("pcaa",))
    assert ExperimentConfig("stripes", methods=("es",)).methods == ("es-global",)
    with pytest.raises(ConfigError):
        run_experiment(ExperimentConfig("stripes", k=2))
    with pytest.raises(ConfigError):
        run_experiment(ExperimentConfig("nosuch.csv"))


def test_end_to_end_outputs(tmp_path):
    cfg = ExperimentConfig("stripes", methods=("pca", "kpca", "es-global", "es-partial", "gp"), repeats=2,
                           out=str(tmp_path), **FAST)
    recs = run_experiment(cfg)
    assert [r.seed for r in recs] == [0] * 5 + [1] * 5
    emit_outputs(cfg, recs, str(tmp_path))
    names = sorted(os.listdir(tmp_path))
    assert names == ["curves.csv", "expressions.txt", "results.json", "table.csv"]
    curves = (tmp_path / "curves.csv").read_text().strip().splitlines()
    # 3 ES generations for each ES method, 2 GP generations
    assert len(curves) - 1 == 3 + 3 + 2
    text = (tmp_path / "results.json").read_text()
    assert table_from_results(text) == (tmp_path / "table.csv").read_text()
    assert "duration" not in text
    exprs = (tmp_path / "expressions.txt").read_text()
    assert exprs.count("# seed") == 2 and "x1" in exprs


def test_no_leakage():
    t = gen_stripes(200, seed=0)
    sp = split(t, 0.75, 0)
    t2 = t.take(np.arange(t.n))
    t2.columns = [c.copy() for c in t2.columns]
    for c in t2.columns:
        c[sp.validation] = c[sp.validation] * 3 + 7
    cfg = ExperimentConfig("stripes", methods=("es-global", "gp"), **FAST)
    for m in ("es-global", "gp"):
        a, b = _run_method(m, t, sp, cfg, 0, 0), _run_method(m, t2, sp, cfg, 0, 0)
        assert [h.train_objective for h in a.history] == [h.train_objective for h in b.history]
        assert a.proportion != b.proportion
    assert a.expressions == b.expressions
    ta, _ = baselines._standardized_split(t, sp)
    tb, _ = baselines._standardized_split(t2, sp)
    assert np.array_equal(ta, tb)


def test_cli_determinism(tmp_path):
    args = ["run", "--dataset", "stripes", "--method", "pca,es", "--repeats", "2", "--generations", "2",
            "--population", "8", "--batch-size", "32"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a/results.json").read_bytes() == (tmp_path / "b/results.json").read_bytes()


def test_cli_config_file_and_overrides(tmp_path):
    (tmp_path / "es.cfg").write_text("generations = 1\npopulation = 6\nbatch_size = 16\nsigma_typo = 1\n")
    rc = main(["run", "--dataset", "stripes", "--method", "es", "--repeats", "1", "--config",
               str(tmp_path / "es.cfg"), "--out", str(tmp_path / "o")])
    assert rc == 2
    (tmp_path / "es.cfg").write_text("generations = 1\npopulation = 6\nbatch_size = 16\n")
    rc = main(["run", "--dataset", "stripes", "--method", "es", "--repeats", "1", "--config",
               str(tmp_path / "es.cfg"), "--generations", "2", "--out", str(tmp_path / "o")])
    assert rc == 0
    res = json.loads((tmp_path / "o/results.json").read_text())
    assert res["config"]["es"]["generations"] == 2 and res["config"]["es"]["population"] == 6


@pytest.mark.parametrize("extra,needle", [
    (["--method", "nope"], "valid methods"),
    (["--k", "2"], "k=2"),
    (["--dataset", "/no/such/file.csv", "--schema", "/no/such/schema.json"], "error"),
    (["--method", "es", "--batch-size", "5000"], "batch_size"),
])
def test_cli_errors_single_line(extra, needle, tmp_path, capsys):
    args = ["run", "--dataset", "stripes", "--repeats", "1", "--out", str(tmp_path)]
    rc = main(args + extra)
    err = capsys.readouterr().err.strip().splitlines()
    assert rc != 0 and len(err) == 1 and err[0].startswith("error:") and needle in err[0]


def test_cli_unwritable_out(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    rc = main(["run", "--dataset", "stripes", "--repeats", "1", "--out", str(blocker / "sub")])
    err = capsys.readouterr().err.strip().splitlines()
    assert rc != 0 and len(err) == 1


def test_cli_gp_rejects_categorical(tmp_path, capsys):
    (tmp_path / "d.csv").write_text("a,c\n1,x\n2,y\n3,x\n4,y\n5,x\n")
    (tmp_path / "s.json").write_text('[{"name":"a"},{"name":"c","kind":"categorical","levels":["x","y"]}]')
    rc = main(["run", "--dataset", str(tmp_path / "d.csv"), "--schema", str(tmp_path / "s.json"),
               "--method", "gp", "--repeats", "1", "--out", str(tmp_path / "o")])
    assert rc == 2 and "numerical" in capsys.readouterr().err


def test_file_dataset_mixed(tmp_path):
    rng = np.random.default_rng(0)
    rows = ["a,c,g"] + [f"{rng.normal():.4f},{'xyz'[i % 3]},{'lmh'[i % 3]}" for i in range(40)]
    (tmp_path / "d.csv").write_text("\n".join(rows) + "\n")
    (tmp_path / "s.json").write_text(json.dumps([
        {"name": "a"}, {"name": "c", "kind": "categorical", "levels": list("xyz")},
        {"name": "g", "kind": "ordinal", "levels": list("lmh")}]))
    rc = main(["run", "--dataset", str(tmp_path / "d.csv"), "--schema", str(tmp_path / "s.json"),
               "--method", "pca,kpca,es-partial", "--repeats", "1", "--generations", "2",
               "--population", "6", "--batch-size", "16", "--out", str(tmp_path / "o")])
    assert rc == 0
    row = list(csv.DictReader(open(tmp_path / "o/table.csv")))[0]
    assert row["dataset"] == "d" and 0 < float(row["pca"]) <= 1


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "espca", "run", "--dataset", "circles", "--repeats", "1",
                        "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "table.csv").read_text().startswith("dataset,k,pca\ncircles,1,")


def test_workers_match_serial(tmp_path):
    base = dict(dataset="stripes", methods=("pca", "es-global"), repeats=2, **FAST)
    a = run_experiment(ExperimentConfig(**base))
    b = run_experiment(ExperimentConfig(**base, workers=2))
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]
