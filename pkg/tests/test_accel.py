import os
import subprocess
import sys

import numpy as np
from hypothesis import given, settings, strategies as st

from espca import accel
from espca.gp import random_tree
from espca.transforms import CATEGORICAL, TransformStack, VariableSchema


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), P=st.integers(1, 6), m=st.integers(2, 40), hidden=st.integers(1, 9))
def test_forward_backends_agree(seed, P, m, hidden):
    rng = np.random.default_rng(seed)
    stack = TransformStack((VariableSchema("a"), VariableSchema("c", CATEGORICAL, ("x", "y", "z"))), hidden)
    theta = rng.standard_normal((P, stack.n_params))
    U = rng.standard_normal((m, stack.input_dim))
    args = (theta, U, stack.in_off, stack.par_off, hidden)
    assert np.allclose(accel.forward_population_np(*args), accel.forward_population_nb(*args), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), p=st.integers(2, 7))
def test_pca_backends_agree(seed, p):
    rng = np.random.default_rng(seed)
    T = rng.standard_normal((4, 30, p))
    T[1, :, 0] = 3.0  # a degenerate column
    S1, S2 = accel.standardized_covariance_np(T), accel.standardized_covariance_nb(T)
    assert np.allclose(S1, S2, atol=1e-12)
    assert np.all(S1[1, 0] == 0)
    l1, W1 = accel.eigh_population_np(S1)
    l2, W2 = accel.eigh_population_nb(S1)
    assert np.allclose(l1, l2, atol=1e-10)
    # vectors only compared where eigenvalues are well separated
    gaps = np.abs(np.diff(l1, axis=1)).min(axis=1)
    for c in np.where(gaps > 1e-6)[0]:
        assert np.allclose(W1[c], W2[c], atol=1e-8)


def test_forest_backends_agree(rng):
    trees = [random_tree(rng, int(rng.integers(2, 8)), bool(rng.integers(2))) for _ in range(30)]
    ops = np.array([o for t in trees for o in t.ops], dtype=np.int64)
    vals = np.array([v for t in trees for v in t.vals])
    starts = np.cumsum([0] + [len(t) for t in trees]).astype(np.int64)
    cols = rng.integers(0, 3, 30).astype(np.int64)
    X = rng.uniform(-2, 2, (25, 3))
    a = accel.eval_forest_np(ops, vals, starts, cols, X)
    b = accel.eval_forest_nb(ops, vals, starts, cols, X)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def _backend_in_subprocess(value):
    env = dict(os.environ, ESPCA_BACKEND=value)
    return subprocess.run([sys.executable, "-c", "import espca; print(espca.BACKEND)"],
                          env=env, capture_output=True, text=True)


def test_env_flag_selects_backend():
    assert _backend_in_subprocess("numpy").stdout.strip() == "numpy"
    assert _backend_in_subprocess("numba").stdout.strip() == "numba"
    assert _backend_in_subprocess("fortran").returncode != 0


def test_numpy_backend_end_to_end(tmp_path):
    # same CLI run under both backends: results agree to rounding
    outs = {}
    for b in ("numpy", "numba"):
        env = dict(os.environ, ESPCA_BACKEND=b)
        r = subprocess.run([sys.executable, "-m", "espca", "run", "--dataset", "stripes", "--method", "es,gp",
                            "--repeats", "1", "--generations", "2", "--population", "8", "--batch-size", "32",
                            "--gp-population", "20", "--gp-generations", "2", "--out", str(tmp_path / b)],
                           env=env, capture_output=True, text=True)
        assert r.returncode == 0, r.stderr
        outs[b] = (tmp_path / b / "table.csv").read_text().splitlines()[1].split(",")
    assert np.allclose([float(v) for v in outs["numpy"][2:]], [float(v) for v in outs["numba"][2:]], atol=1e-6)
