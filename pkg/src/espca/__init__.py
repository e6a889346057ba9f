"""Non-linear PCA with per-variable transforms trained by evolution strategies."""
from ._backend import BACKEND
from .baselines import KernelSpec, best_of_kernels, kernel_matrix, kpca_fit, kpca_validation_proportion, linear_pca_baseline
from .data import DataTable, SplitPair, gen_circles, gen_spheres, gen_stripes, load_table, split
from .es import EsConfig, GenerationReport, train
from .gp import GpConfig, evolve
from .harness import ExperimentConfig, RunRecord, aggregate, emit_outputs, relative_difference, run_experiment
from .pca import (PcaModel, Standardizer, contributions, covariance, eig_sym, explained_variance_validation,
                  fit_pca, fit_standardizer, global_objective, partial_objective, project)
from .transforms import Encoder, TransformStack, VariableSchema, build_stack

__version__ = "0.1.0"
