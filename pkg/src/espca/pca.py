"""Standardization, covariance, symmetric eigendecomposition and the two
explained-variance objectives.

All standard deviations and covariances use the sample divisor ``n - 1`` so
that the covariance of standardized data has a unit diagonal exactly.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InsufficientRowsError, InvalidDataError, ShapeError

STD_FLOOR = 1e-12
EIG_CLAMP = 1e-10
SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray
    # columns whose raw std fell below the floor; they standardize to 0
    degenerate: np.ndarray

    def apply(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.means.shape[0]:
            raise ShapeError(f"expected {self.means.shape[0]} columns, got shape {X.shape}")
        Z = (X - self.means) / self.stds
        if self.degenerate.any():
            Z[:, self.degenerate] = 0.0
        return Z


@dataclass(frozen=True)
class PcaModel:
    standardizer: Standardizer
    eigenvalues: np.ndarray
    loadings: np.ndarray  # rows are eigenvectors
    covariance: np.ndarray
    total_variance: float

    @property
    def n_features(self):
        return self.eigenvalues.shape[0]

    def proportions(self):
        if self.total_variance <= 0:
            return np.zeros_like(self.eigenvalues)
        return self.eigenvalues / self.total_variance


def _as_matrix(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {X.shape}")
    return X


def fit_standardizer(X):
    X = _as_matrix(X)
    if X.shape[0] < 2:
        raise InsufficientRowsError(f"need at least 2 rows, got {X.shape[0]}")
    if not np.isfinite(X).all():
        raise InvalidDataError("input contains non-finite values")
    means = X.mean(axis=0)
    stds = X.std(axis=0, ddof=1)
    degenerate = stds < STD_FLOOR
    return Standardizer(means, np.maximum(stds, STD_FLOOR), degenerate)


def covariance(Xstd):
    Xstd = _as_matrix(Xstd)
    n = Xstd.shape[0]
    if n < 2:
        raise InsufficientRowsError(f"need at least 2 rows, got {n}")
    centered = Xstd - Xstd.mean(axis=0)
    S = centered.T @ centered / (n - 1)
    return (S + S.T) / 2


def fix_signs(vectors):
    """Flip each row so its largest-magnitude entry is positive.

    Ties resolve to the first such index (``argmax`` semantics).
    """
    vectors = np.array(vectors, dtype=float, copy=True)
    idx = np.argmax(np.abs(vectors), axis=-1)
    pivot = np.take_along_axis(vectors, idx[..., None], axis=-1)
    vectors *= np.where(pivot < 0, -1.0, 1.0)
    return vectors


def eig_sym(S):
    """Eigendecomposition of a symmetric matrix.

    Returns
    -------
    eigenvalues : ndarray (p,)
        Sorted in descending order; values in ``[-1e-10, 0)`` are clamped to 0.
    vectors : ndarray (p, p)
        Row ``j`` is the unit eigenvector for ``eigenvalues[j]``.
    """
    S = _as_matrix(S)
    if S.shape[0] != S.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {S.shape}")
    scale = max(1.0, float(np.abs(S).max(initial=0.0)))
    if np.abs(S - S.T).max(initial=0.0) > SYMMETRY_TOL * scale:
        raise InvalidDataError("matrix is not symmetric")
    S = (S + S.T) / 2
    lam, V = np.linalg.eigh(S)
    order = np.argsort(lam)[::-1]
    lam = lam[order]
    lam = np.where((lam < 0) & (lam >= -EIG_CLAMP), 0.0, lam)
    return lam, fix_signs(V[:, order].T)


def fit_pca(X):
    """Standardize ``X`` and eigendecompose its covariance."""
    std = fit_standardizer(X)
    S = covariance(std.apply(X))
    lam, W = eig_sym(S)
    return PcaModel(std, lam, W, S, float(np.trace(S)))


def project(model, X):
    return model.standardizer.apply(X) @ model.loadings.T


def contributions(W, S):
    """Per-variable share of each eigenvalue.

    ``C[j, l] = W[j, l]**2 * S[l, l] + sum_{i != l} W[j, i] * W[j, l] * S[i, l]``,
    which collapses to ``W[j, l] * (S @ W[j])[l]``. Row ``j`` sums to the
    Rayleigh quotient of ``W[j]``, i.e. to the eigenvalue when ``W`` holds
    eigenvectors.
    """
    W = np.asarray(W, dtype=float)
    S = np.asarray(S, dtype=float)
    if W.ndim != 2 or S.ndim != 2 or S.shape[0] != S.shape[1] or W.shape[1] != S.shape[0]:
        raise ShapeError(f"incompatible shapes W{W.shape} and S{S.shape}")
    return W * (W @ S)


def _check_k(k, p):
    if not 1 <= k <= p:
        raise ConfigError(f"k must lie in [1, {p}], got {k}")


def global_objective(eigenvalues, k):
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    _check_k(k, eigenvalues.shape[0])
    return float(eigenvalues[:k].sum())


def partial_objective(C, l, k):
    """Sum of variable ``l``'s contributions to the first ``k`` eigenvalues.

    ``l`` is a zero-based column index.
    """
    C = np.asarray(C, dtype=float)
    p = C.shape[1]
    if not 0 <= l < p:
        raise ConfigError(f"variable index must lie in [0, {p}), got {l}")
    _check_k(k, C.shape[0])
    return float(C[:k, l].sum())


def partial_objectives(C, k):
    C = np.asarray(C, dtype=float)
    _check_k(k, C.shape[0])
    return C[:k].sum(axis=0)


def explained_variance_validation(model, Xval, k):
    """Share of the validation variance captured by the first ``k`` training
    components, with validation rows standardized by training statistics.
    """
    Xval = _as_matrix(Xval)
    if Xval.shape[0] < 2:
        raise InsufficientRowsError("validation set needs at least 2 rows")
    _check_k(k, model.n_features)
    B = model.standardizer.apply(Xval)
    total = B.var(axis=0, ddof=1).sum()
    if total <= 0:
        return 0.0
    Z = B @ model.loadings[:k].T
    return float(Z.var(axis=0, ddof=1).sum() / total)
