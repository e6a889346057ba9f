"""Hot loops: population forward passes, batched PCA and GP tree evaluation.

Each kernel has a numba implementation (``*_nb``) and a vectorized numpy one
(``*_np``). The module-level names dispatch to whichever ``ESPCA_BACKEND``
selected; both variants stay importable so they can be compared directly.
"""
import numpy as np

from ._backend import BACKEND, njit
from .pca import EIG_CLAMP, STD_FLOOR

# GP opcodes, shared with gp.py
OP_VAR, OP_CONST, OP_ADD, OP_SUB, OP_MUL, OP_COS, OP_SIN = range(7)


# ---------------------------------------------------------------------------
# population forward pass
#
# Net l reads input columns U[:, in_off[l]:in_off[l+1]] and owns parameters
# theta[:, par_off[l]:par_off[l+1]] laid out as W1 (d x H, row-major), b1 (H),
# w2 (H), b2 (1).


def forward_population_np(theta, U, in_off, par_off, hidden):
    P = theta.shape[0]
    m = U.shape[0]
    p = len(in_off) - 1
    out = np.empty((P, m, p))
    H = hidden
    for l in range(p):
        a, d = in_off[l], in_off[l + 1] - in_off[l]
        o = par_off[l]
        W1 = theta[:, o:o + d * H].reshape(P, d, H)
        b1 = theta[:, o + d * H:o + d * H + H]
        w2 = theta[:, o + d * H + H:o + d * H + 2 * H]
        b2 = theta[:, o + d * H + 2 * H]
        pre = np.einsum("md,Pdh->Pmh", U[:, a:a + d], W1) + b1[:, None, :]
        np.maximum(pre, 0.0, out=pre)
        out[:, :, l] = np.einsum("Pmh,Ph->Pm", pre, w2) + b2[:, None]
    return out


@njit
def forward_population_nb(theta, U, in_off, par_off, hidden):
    P = theta.shape[0]
    m = U.shape[0]
    p = in_off.shape[0] - 1
    H = hidden
    out = np.empty((P, m, p))
    z = np.empty(H)
    for c in range(P):
        for l in range(p):
            a = in_off[l]
            d = in_off[l + 1] - a
            o = par_off[l]
            # contiguous copies so the hidden-unit loops vectorize
            W1 = theta[c, o:o + d * H].copy().reshape((d, H))
            b1 = theta[c, o + d * H:o + d * H + H].copy()
            w2 = theta[c, o + d * H + H:o + d * H + 2 * H].copy()
            b2 = theta[c, o + d * H + 2 * H]
            for r in range(m):
                for h in range(H):
                    z[h] = b1[h]
                for i in range(d):
                    u = U[r, a + i]
                    for h in range(H):
                        z[h] += u * W1[i, h]
                acc = 0.0
                for h in range(H):
                    acc += max(z[h], 0.0) * w2[h]
                out[c, r, l] = acc + b2
    return out


# ---------------------------------------------------------------------------
# batched PCA over a stack of transformed minibatches T (P, m, p)


def standardized_covariance_np(T):
    m = T.shape[1]
    mu = T.mean(axis=1, keepdims=True)
    sd = T.std(axis=1, ddof=1, keepdims=True)
    A = (T - mu) / np.maximum(sd, STD_FLOOR)
    A = np.where(sd < STD_FLOOR, 0.0, A)
    A -= A.mean(axis=1, keepdims=True)
    S = np.einsum("Pmi,Pmj->Pij", A, A) / (m - 1)
    return (S + S.transpose(0, 2, 1)) / 2


@njit
def standardized_covariance_nb(T):
    P, m, p = T.shape
    S = np.zeros((P, p, p))
    A = np.empty((m, p))
    for c in range(P):
        for l in range(p):
            mu = 0.0
            for r in range(m):
                mu += T[c, r, l]
            mu /= m
            ss = 0.0
            for r in range(m):
                dv = T[c, r, l] - mu
                ss += dv * dv
            sd = np.sqrt(ss / (m - 1))
            if sd < STD_FLOOR:
                for r in range(m):
                    A[r, l] = 0.0
            else:
                mu2 = 0.0
                for r in range(m):
                    A[r, l] = (T[c, r, l] - mu) / sd
                    mu2 += A[r, l]
                mu2 /= m
                for r in range(m):
                    A[r, l] -= mu2
        for i in range(p):
            for j in range(i, p):
                acc = 0.0
                for r in range(m):
                    acc += A[r, i] * A[r, j]
                acc /= m - 1
                S[c, i, j] = acc
                S[c, j, i] = acc
    return S


def eigh_population_np(S):
    lam, V = np.linalg.eigh(S)
    lam = lam[:, ::-1]
    W = V[:, :, ::-1].transpose(0, 2, 1).copy()
    idx = np.argmax(np.abs(W), axis=2)
    pivot = np.take_along_axis(W, idx[..., None], axis=2)
    W *= np.where(pivot < 0, -1.0, 1.0)
    lam = np.where((lam < 0) & (lam >= -EIG_CLAMP), 0.0, lam)
    return np.ascontiguousarray(lam), W


@njit
def eigh_population_nb(S):
    P, p, _ = S.shape
    lam = np.empty((P, p))
    W = np.empty((P, p, p))
    for c in range(P):
        vals, vecs = np.linalg.eigh(S[c])
        for j in range(p):
            src = p - 1 - j
            v = vals[src]
            if v < 0.0 and v >= -EIG_CLAMP:
                v = 0.0
            lam[c, j] = v
            best = 0
            for i in range(p):
                if abs(vecs[i, src]) > abs(vecs[best, src]):
                    best = i
            sign = -1.0 if vecs[best, src] < 0.0 else 1.0
            for i in range(p):
                W[c, j, i] = sign * vecs[i, src]
    return lam, W


def contributions_population(W, S):
    """``C[c, j, l] = W[c, j, l] * (W[c] @ S[c])[j, l]`` for every candidate."""
    return W * np.matmul(W, S)


def rayleigh_population(W, S):
    """Variance along each fixed basis row: ``diag(W S W^T)`` per candidate."""
    return contributions_population(W, S).sum(axis=2)


# ---------------------------------------------------------------------------
# GP trees, stored in prefix order as (ops, vals)


def eval_prefix_np(ops, vals, x):
    stack = []
    for i in range(len(ops) - 1, -1, -1):
        op = ops[i]
        if op == OP_VAR:
            stack.append(x)
        elif op == OP_CONST:
            stack.append(np.full(x.shape, vals[i]))
        elif op == OP_COS:
            stack.append(np.cos(stack.pop()))
        elif op == OP_SIN:
            stack.append(np.sin(stack.pop()))
        else:
            a = stack.pop()
            b = stack.pop()
            if op == OP_ADD:
                stack.append(a + b)
            elif op == OP_SUB:
                stack.append(a - b)
            else:
                stack.append(a * b)
    out = stack[0]
    return out.copy() if out is x else out


@njit
def eval_prefix_nb(ops, vals, x):
    L = ops.shape[0]
    n = x.shape[0]
    stack = np.empty((L, n))
    sp = 0
    for i in range(L - 1, -1, -1):
        op = ops[i]
        if op == OP_VAR:
            for r in range(n):
                stack[sp, r] = x[r]
            sp += 1
        elif op == OP_CONST:
            for r in range(n):
                stack[sp, r] = vals[i]
            sp += 1
        elif op == OP_COS:
            for r in range(n):
                stack[sp - 1, r] = np.cos(stack[sp - 1, r])
        elif op == OP_SIN:
            for r in range(n):
                stack[sp - 1, r] = np.sin(stack[sp - 1, r])
        else:
            # top of stack is the first operand
            for r in range(n):
                a = stack[sp - 1, r]
                b = stack[sp - 2, r]
                if op == OP_ADD:
                    stack[sp - 2, r] = a + b
                elif op == OP_SUB:
                    stack[sp - 2, r] = a - b
                else:
                    stack[sp - 2, r] = a * b
            sp -= 1
    return stack[0].copy()


def eval_forest_np(ops, vals, starts, cols, X):
    """Evaluate many packed trees; tree ``t`` reads column ``cols[t]`` of X."""
    out = np.empty((len(cols), X.shape[0]))
    for t in range(len(cols)):
        s, e = starts[t], starts[t + 1]
        out[t] = eval_prefix_np(ops[s:e], vals[s:e], X[:, cols[t]])
    return out


@njit
def eval_forest_nb(ops, vals, starts, cols, X):
    nt = cols.shape[0]
    out = np.empty((nt, X.shape[0]))
    xc = np.empty(X.shape[0])
    for t in range(nt):
        for r in range(X.shape[0]):
            xc[r] = X[r, cols[t]]
        out[t] = eval_prefix_nb(ops[starts[t]:starts[t + 1]], vals[starts[t]:starts[t + 1]], xc)
    return out


# ---------------------------------------------------------------------------

if BACKEND == "numba":
    forward_population = forward_population_nb
    standardized_covariance = standardized_covariance_nb
    eigh_population = eigh_population_nb
    eval_prefix = eval_prefix_nb
    eval_forest = eval_forest_nb
else:
    forward_population = forward_population_np
    standardized_covariance = standardized_covariance_np
    eigh_population = eigh_population_np
    eval_prefix = eval_prefix_np
    eval_forest = eval_forest_np


def pca_population(T):
    """Standardize each candidate's matrix and eigendecompose its covariance.

    Returns eigenvalues (P, p) descending, loadings (P, p, p) with rows as
    eigenvectors, and covariances (P, p, p).
    """
    S = standardized_covariance(np.ascontiguousarray(T, dtype=float))
    lam, W = eigh_population(S)
    return lam, W, S
