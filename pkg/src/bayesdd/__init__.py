"""Kernel data description: SVDD, Bayesian (BDD), semi-supervised (SSDD) and ML baselines."""
from .bdd import Prior, train_bdd, train_ml
from .data import Dataset, load_builtin, load_csv, load_dataset, load_libsvm, make_one_class_split
from .errors import (BayesDDError, ConvergenceWarning, DimensionMismatchError, EmptyDatasetError,
                     InfeasibleError, NoBoundarySupportVectorError, NotPositiveDefiniteError,
                     ParameterError, ParseError)
from .evaluation import cross_validate, outlier_ratio_sweep, precision_at_k, rank, run_benchmark
from .kernel import GramMatrix, KernelSpec, cross_kernel, eval_kernel, gram_matrix
from .model import DescriptionModel, load_model, save_model
from .qp import QpProblem, QpSolution, project_capped_simplex, solve
from .ssdd import train_ssdd
from .svdd import radius_sq, train_svdd

__version__ = "0.1.0"
