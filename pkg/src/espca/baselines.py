"""Linear PCA and kernel PCA reference methods.

Both consume the expanded design matrix (one-hot categoricals, rank
positions for ordinals) standardized with training statistics.

The kPCA explained-variance proportion is measured among the retained
components: the fit keeps as many leading components as the input has
columns, validation rows are projected onto them, and the first ``k``
projected variances are divided by the variance of all retained
projections. ``reference="feature"`` divides by the total centered
feature-space variance of the validation rows instead.
"""
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .data import expand_matrix
from .errors import ConfigError, EspcaError, NumericalWarning
from .pca import explained_variance_validation, fit_pca, fit_standardizer

KERNELS = ("rbf", "polynomial", "cosine", "sigmoid", "linear")
TIE_ORDER = ("rbf", "polynomial", "cosine", "sigmoid")
POSITIVE_TOL = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """``gamma=None`` means 1 / n_features at evaluation time."""

    kind: str = "rbf"
    gamma: float = None
    degree: int = 2
    coef0: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ConfigError(f"unknown kernel {self.kind!r}; choose from {KERNELS}")
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigError("gamma must be positive")

    def resolved_gamma(self, n_features):
        return self.gamma if self.gamma is not None else 1.0 / n_features


def kernel_matrix(spec, A, B):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ConfigError(f"feature mismatch {A.shape} vs {B.shape}")
    g = spec.resolved_gamma(A.shape[1])
    if spec.kind == "rbf":
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2 * A @ B.T
        return np.exp(-g * np.maximum(sq, 0.0))
    dot = A @ B.T
    if spec.kind == "linear":
        return dot
    if spec.kind == "polynomial":
        return (g * dot + spec.coef0) ** spec.degree
    if spec.kind == "sigmoid":
        return np.tanh(g * dot + spec.coef0)
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    denom = np.outer(na, nb)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(denom > 0, dot / np.where(denom > 0, denom, 1.0), 0.0)


@dataclass(frozen=True)
class KpcaFit:
    spec: KernelSpec
    X_train: np.ndarray
    eigenvalues: np.ndarray  # retained, descending, all positive
    alphas: np.ndarray  # (n, r) eigenvectors scaled by 1/sqrt(eigenvalue)
    K_col_means: np.ndarray
    K_mean: float

    @property
    def n_components(self):
        return self.eigenvalues.shape[0]


def center_kernel(K):
    """Double centering: ``K - 1K - K1 + 1K1`` with ``1`` the averaging matrix."""
    col = K.mean(axis=0)
    row = K.mean(axis=1)
    return K - col[None, :] - row[:, None] + K.mean()


def kpca_fit(X_train, spec, n_components=None):
    X_train = np.asarray(X_train, dtype=float)
    n = X_train.shape[0]
    if n < 2:
        raise ConfigError("kPCA needs at least 2 training rows")
    r = X_train.shape[1] if n_components is None else n_components
    r = min(r, n)
    K = kernel_matrix(spec, X_train, X_train)
    Kc = center_kernel(K)
    Kc = (Kc + Kc.T) / 2
    lam, V = linalg.eigh(Kc, subset_by_index=[n - r, n - 1])
    lam, V = lam[::-1], V[:, ::-1]
    keep = lam > POSITIVE_TOL * max(1.0, abs(lam[0]))
    lam, V = lam[keep], V[:, keep]
    return KpcaFit(spec, X_train, lam, V / np.sqrt(lam), K.mean(axis=0), float(K.mean()))


def kpca_transform(fit, X):
    Kv = kernel_matrix(fit.spec, X, fit.X_train)
    Kv_c = Kv - Kv.mean(axis=1, keepdims=True) - fit.K_col_means[None, :] + fit.K_mean
    return Kv_c @ fit.alphas


def kpca_validation_proportion(fit, X_val, k, reference="retained"):
    X_val = np.asarray(X_val, dtype=float)
    if X_val.shape[0] < 2:
        raise ConfigError("validation set needs at least 2 rows")
    if fit.n_components == 0:
        warnings.warn("kernel has no positive spectrum", NumericalWarning, stacklevel=2)
        return 0.0
    if k > fit.n_components:
        warnings.warn(
            f"k={k} exceeds the {fit.n_components} positive components; using all of them",
            NumericalWarning, stacklevel=2,
        )
        k = fit.n_components
    var = kpca_transform(fit, X_val).var(axis=0, ddof=1)
    if reference == "retained":
        total = var.sum()
    elif reference == "feature":
        m = X_val.shape[0]
        total = np.trace(center_kernel(kernel_matrix(fit.spec, X_val, X_val))) / (m - 1)
    else:
        raise ConfigError(f"unknown reference {reference!r}")
    return float(var[:k].sum() / total) if total > 0 else 0.0


def _standardized_split(table, split):
    X = expand_matrix(table)
    std = fit_standardizer(X[split.train])
    return std.apply(X[split.train]), std.apply(X[split.validation])


def linear_pca_baseline(table, split, k):
    X = expand_matrix(table)
    model = fit_pca(X[split.train])
    return explained_variance_validation(model, X[split.validation], k)


def kpca_baseline(table, split, k, spec):
    Xtr, Xva = _standardized_split(table, split)
    return kpca_validation_proportion(kpca_fit(Xtr, spec), Xva, k)


def best_of_kernels(table, split, k):
    """Best validation proportion over rbf, quadratic, cosine and sigmoid.

    Returns ``(proportion, kernel_name, failures)``; ties go to the earlier
    kernel in rbf > polynomial > cosine > sigmoid order, and a kernel that
    raises is skipped and listed in ``failures``.
    """
    Xtr, Xva = _standardized_split(table, split)
    best, name, failures = -np.inf, None, {}
    for kind in TIE_ORDER:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NumericalWarning)
                score = kpca_validation_proportion(kpca_fit(Xtr, KernelSpec(kind)), Xva, k)
        except (EspcaError, np.linalg.LinAlgError, linalg.LinAlgError) as exc:
            failures[kind] = str(exc)
            continue
        if score > best:
            best, name = score, kind
    if name is None:
        raise EspcaError(f"every kernel failed: {failures}")
    return float(best), name, failures
