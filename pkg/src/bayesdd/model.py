"""Trained one-class models and the shared distance-to-center scorer."""
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, ParameterError
from .kernel import KernelSpec, cross_kernel, self_kernel

METHODS = ("svdd", "bdd", "ssdd", "ml")
FORMAT_NAME = "bayesdd-model"
FORMAT_VERSION = 1

# support vectors are weights above this fraction of the largest weight
SPARSITY_RATIO = 1e-6


def support_indices(alpha):
    alpha = np.asarray(alpha)
    if alpha.size == 0:
        return np.zeros(0, dtype=int)
    return np.flatnonzero(alpha > SPARSITY_RATIO * alpha.max())


@dataclass(eq=False)
class DescriptionModel:
    """Center of a data description, kept implicitly as ``sum_i alpha_i phi(x_i)``.

    ``center_norm_sq`` caches ``alpha' K alpha``. ``params`` records the
    hyperparameters the model was trained with and ``solver`` the QP
    diagnostics; both travel with the serialized model. When ``input_mean``
    and ``input_scale`` are set, ``score`` z-scores raw inputs with them
    before evaluating the kernel (``train_points`` are then stored scaled).
    """

    train_points: np.ndarray
    alpha: np.ndarray
    kernel: KernelSpec
    center_norm_sq: float
    method_tag: str
    upper_bound: float = 1.0
    params: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    input_mean: np.ndarray = None
    input_scale: np.ndarray = None

    def __post_init__(self):
        self.train_points = np.asarray(self.train_points, dtype=np.float64)
        self.alpha = np.asarray(self.alpha, dtype=np.float64).ravel()
        if self.train_points.ndim != 2 or self.train_points.shape[0] != self.alpha.shape[0]:
            raise ParameterError(
                f"alpha length {self.alpha.shape[0]} does not match "
                f"train_points shape {self.train_points.shape}")
        if self.method_tag not in METHODS:
            raise ParameterError(f"unknown method tag {self.method_tag!r}")
        if (self.input_mean is None) != (self.input_scale is None):
            raise ParameterError("input_mean and input_scale must be given together")
        if self.input_mean is not None:
            self.input_mean = np.asarray(self.input_mean, dtype=np.float64).ravel()
            self.input_scale = np.asarray(self.input_scale, dtype=np.float64).ravel()
            if self.input_mean.shape[0] != self.dim or self.input_scale.shape[0] != self.dim:
                raise DimensionMismatchError(self.dim, self.input_mean.shape[0],
                                             "input transform dimension")

    @classmethod
    def from_weights(cls, X, alpha, kernel, gram, method_tag, upper_bound=1.0,
                     params=None, solution=None):
        alpha = np.asarray(alpha, dtype=np.float64)
        center = float(max(0.0, alpha @ gram.values @ alpha))
        solver = {}
        if solution is not None:
            solver = {"iterations": int(solution.iterations),
                      "kkt_residual": float(solution.kkt_residual),
                      "converged": bool(solution.converged),
                      "objective": float(solution.objective)}
        return cls(train_points=X, alpha=alpha, kernel=kernel, center_norm_sq=center,
                   method_tag=method_tag, upper_bound=float(upper_bound),
                   params=dict(params or {}), solver=solver)

    @property
    def n(self):
        return self.alpha.shape[0]

    @property
    def dim(self):
        return self.train_points.shape[1]

    @property
    def support_indices(self):
        return support_indices(self.alpha)

    @property
    def converged(self):
        return self.solver.get("converged", True)

    def score(self, Z):
        """Squared embedded-space distance from each row of Z to the center.

        Smaller means more target-like.
        """
        Z = np.asarray(Z, dtype=np.float64)
        if Z.ndim == 1:
            Z = Z.reshape(1, -1)
        if Z.shape[1] != self.dim:
            raise DimensionMismatchError(self.dim, Z.shape[1])
        if self.input_mean is not None:
            Z = (Z - self.input_mean) / self.input_scale
        cross = cross_kernel(self.kernel, self.train_points, Z) @ self.alpha
        return self.center_norm_sq + self_kernel(self.kernel, Z) - 2.0 * cross

    def to_dict(self):
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "method": self.method_tag,
            "kernel": self.kernel.to_dict(),
            "upper_bound": self.upper_bound,
            "center_norm_sq": self.center_norm_sq,
            "alpha": self.alpha.tolist(),
            "train_points": self.train_points.tolist(),
            "params": self.params,
            "solver": self.solver,
            "input_transform": None if self.input_mean is None else {
                "mean": self.input_mean.tolist(), "scale": self.input_scale.tolist()},
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != FORMAT_NAME:
            raise ParameterError(f"not a {FORMAT_NAME} document")
        if doc.get("version") != FORMAT_VERSION:
            raise ParameterError(f"unsupported model version {doc.get('version')!r}")
        points = np.array(doc["train_points"], dtype=np.float64)
        if points.ndim == 1:
            points = points.reshape(len(doc["alpha"]), -1)
        transform = doc.get("input_transform") or {}
        return cls(train_points=points,
                   alpha=np.array(doc["alpha"], dtype=np.float64),
                   kernel=KernelSpec.from_dict(doc["kernel"]),
                   center_norm_sq=float(doc["center_norm_sq"]),
                   method_tag=doc["method"],
                   upper_bound=float(doc["upper_bound"]),
                   params=dict(doc.get("params", {})),
                   solver=dict(doc.get("solver", {})),
                   input_mean=transform.get("mean"),
                   input_scale=transform.get("scale"))


def score(model, Z):
    return model.score(Z)


def dumps(model):
    # repr-exact floats: json round-trips doubles bit-for-bit
    return json.dumps(model.to_dict(), indent=1, sort_keys=True)


def save_model(model, path):
    with open(path, "w") as fh:
        fh.write(dumps(model))
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        return DescriptionModel.from_dict(json.load(fh))
