"""Ranking metrics, model selection and experiment drivers."""
import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .bdd import train_bdd, train_ml
from .data import load_dataset, make_one_class_split, shuffled_indices, standardize
from .errors import BayesDDError, ParameterError
from .kernel import GramMatrix, KernelSpec, gram_matrix
from .ssdd import train_ssdd
from .svdd import train_svdd
from .synth import uniform_box

METHODS = ("svdd", "bdd", "ssdd", "ml")


@dataclass(eq=False)
class RankingResult:
    scores: np.ndarray
    order: np.ndarray
    k: int


def rank(scores, k=None):
    """Ascending order by score, ties by test index."""
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(scores, kind="stable")
    return RankingResult(scores=scores, order=order, k=len(scores) if k is None else int(k))


def precision_at_k(result, is_target):
    is_target = np.asarray(is_target, dtype=bool)
    if is_target.shape[0] != result.scores.shape[0]:
        raise ParameterError("is_target length does not match the number of scores")
    if not 1 <= result.k <= result.scores.shape[0]:
        raise ParameterError(f"k={result.k} out of range for {result.scores.shape[0]} test points")
    return float(is_target[result.order[:result.k]].mean())


def precision_for_scores(scores, is_target):
    """Precision@k with k set to the number of targets."""
    is_target = np.asarray(is_target, dtype=bool)
    return precision_at_k(rank(scores, int(is_target.sum())), is_target)


@dataclass
class ExperimentConfig:
    """Hyperparameters for a benchmark or sweep.

    ``sigma="cv"`` selects the kernel width by cross validation over
    ``sigma_factors * sqrt(d)`` (features are standardized); a number fixes it.
    ``nu`` likewise is "cv" or a per-method mapping.
    """

    sigma: object = "cv"
    nu: object = "cv"
    sigma_factors: tuple = (0.125, 0.25, 0.5, 1.0)
    nu_grids: dict = field(default_factory=lambda: {
        "svdd": (0.05, 0.2, 0.5, 1.0),
        "bdd": (0.1, 0.5, 0.9),
        "ssdd": (0.1, 0.5, 0.9),
        "ml": (0.5,),
    })
    default_nu: dict = field(default_factory=lambda: {
        "svdd": 0.2, "bdd": 0.5, "ssdd": 0.5, "ml": 0.5})
    folds: int = 10
    semi_supervised: bool = False
    unlabeled_fraction: float = 2.0 / 3.0
    graph_k: int = 7
    epsilon: float = 1e-3
    use_laplacian_precision: bool = False
    bdd_upper_bound: float = 1.0
    standardize: bool = True
    solver_options: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["sigma_factors"] = list(self.sigma_factors)
        d["nu_grids"] = {k: list(v) for k, v in self.nu_grids.items()}
        return d


def train_method(method, X, sigma, nu, X_unlabeled=None, config=None, gram=None):
    config = config or ExperimentConfig()
    kernel = KernelSpec("gaussian", sigma)
    opts = config.solver_options
    if method == "svdd":
        return train_svdd(X, nu, kernel, gram=gram, **opts)
    if method == "bdd":
        return train_bdd(X, nu, kernel, upper_bound=config.bdd_upper_bound, gram=gram, **opts)
    if method == "ml":
        return train_ml(X, kernel, gram=gram, **opts)
    if method == "ssdd":
        if X_unlabeled is None:
            X_unlabeled = np.zeros((0, X.shape[1]))
        k = min(config.graph_k, X.shape[0] + X_unlabeled.shape[0] - 1)
        return train_ssdd(X, X_unlabeled, nu, kernel, graph_k=max(k, 1),
                          epsilon=config.epsilon,
                          use_laplacian_precision=config.use_laplacian_precision,
                          upper_bound=config.bdd_upper_bound, **opts)
    raise ParameterError(f"unknown method {method!r}")


def _sub_gram(K, idx):
    block = K[np.ix_(idx, idx)]
    return GramMatrix(values=block, degrees=block.sum(axis=1))


def cross_validate(train_targets, sigma_grid, nu_grid, folds=10, seed=0, method="bdd",
                   config=None, return_table=False):
    """Pick (sigma, nu) by k-fold precision@k against a uniform background.

    Each held-out fold is ranked together with as many uniform points drawn
    from the bounding box of the training targets; the cell with the best
    mean precision wins, ties going to larger sigma, then larger nu.
    ``method="ssdd"`` is selected with the supervised BDD objective.
    """
    X = np.asarray(train_targets, dtype=np.float64)
    n = X.shape[0]
    if folds < 2:
        raise ParameterError("need at least 2 folds")
    if n < folds:
        raise ParameterError(f"{n} training samples cannot fill {folds} folds")
    sigma_grid = [float(s) for s in sigma_grid]
    nu_grid = [float(v) for v in nu_grid]
    if not sigma_grid or not nu_grid:
        raise ParameterError("empty hyperparameter grid")
    cv_method = "bdd" if method == "ssdd" else method

    fold_of = np.empty(n, dtype=int)
    fold_of[shuffled_indices(n, seed)] = np.arange(n) % folds
    background = uniform_box(X, n, seed=seed)
    everything = np.vstack((X, background))

    table = {}
    for sigma in sigma_grid:
        K = gram_matrix(KernelSpec("gaussian", sigma), everything).values
        for nu in nu_grid:
            precisions = []
            for f in range(folds):
                train_idx = np.flatnonzero(fold_of != f)
                held = np.flatnonzero(fold_of == f)
                if held.size == 0 or train_idx.size == 0:
                    raise ParameterError(f"fold {f} is empty")
                bg = n + np.arange(f, n, folds)
                model = train_method(cv_method, X[train_idx], sigma, nu, config=config,
                                     gram=_sub_gram(K, train_idx))
                # background first: ties (e.g. every point far from all
                # training data at tiny sigma) then count against the targets
                test_idx = np.concatenate((bg, held))
                cross = K[np.ix_(test_idx, train_idx)] @ model.alpha
                scores = model.center_norm_sq + 1.0 - 2.0 * cross
                is_target = np.concatenate((np.zeros(bg.size, bool), np.ones(held.size, bool)))
                precisions.append(precision_for_scores(scores, is_target))
            table[(sigma, nu)] = float(np.mean(precisions))

    best = max(table, key=lambda cell: (round(table[cell], 12), cell[0], cell[1]))
    if return_table:
        return best, table
    return best


def _seed_for(seed, repetition, class_index):
    return int(seed) + 7919 * int(repetition) + 104729 * int(class_index)


def _prepare_split(split, config):
    if not config.standardize:
        return split.train_targets, split.test_features, split.unlabeled_pool
    tr, (te, un), _ = standardize(split.train_targets, [split.test_features, split.unlabeled_pool])
    return tr, te, un


def select_hyperparameters(method, X, seed, config):
    d = X.shape[1]
    sigma_grid = ([f * math.sqrt(d) for f in config.sigma_factors]
                  if config.sigma == "cv" else [float(config.sigma)])
    if config.nu == "cv":
        nu_grid = list(config.nu_grids[method])
    else:
        nu_grid = [float(config.nu[method] if isinstance(config.nu, dict) else config.nu)]
    if len(sigma_grid) == 1 and len(nu_grid) == 1:
        return sigma_grid[0], nu_grid[0]
    folds = min(config.folds, X.shape[0])
    if folds < 2:
        # too few targets to hold any out: middle of the grid
        return sigma_grid[len(sigma_grid) // 2], nu_grid[len(nu_grid) // 2]
    return cross_validate(X, sigma_grid, nu_grid, folds=folds, seed=seed, method=method,
                          config=config)


def evaluate_split(split, methods, config, seed=0, cv_cache=None):
    """Train each method on one split; returns {method: (precision, seconds, model)}."""
    X, Z, U = _prepare_split(split, config)
    out = {}
    cache = {} if cv_cache is None else cv_cache
    for method in methods:
        key = "bdd" if method == "ssdd" else method
        if key not in cache:
            cache[key] = select_hyperparameters(key, X, seed, config)
        sigma, nu = cache[key]
        start = time.perf_counter()
        model = train_method(method, X, sigma, nu, X_unlabeled=U, config=config)
        elapsed = time.perf_counter() - start
        out[method] = (precision_for_scores(model.score(Z), split.test_is_target), elapsed, model)
    return out


@dataclass
class BenchmarkRow:
    dataset: str
    method: str
    mean_precision: float
    std_precision: float
    mean_runtime: float
    runs: int
    error: str = ""


def run_benchmark(datasets, methods, repetitions=10, seed=0, config=None, loader=None):
    """Mean +- std precision@k per dataset and method.

    ``datasets`` holds names passed to ``loader`` (``load_dataset`` by
    default) or ready ``Dataset`` objects. Every class of a dataset takes a
    turn as target in each repetition; the class-averaged precision of a
    repetition is one run. The std is the sample std over runs. A dataset
    that fails is reported with its error and skipped.
    """
    loader = loader or load_dataset
    config = config or ExperimentConfig()
    for m in methods:
        if m not in METHODS:
            raise ParameterError(f"unknown method {m!r}")
    semi = config.semi_supervised or "ssdd" in methods
    rows = []
    for source in datasets:
        name = source if isinstance(source, str) else source.name
        try:
            ds = loader(source) if isinstance(source, str) else source
            per_run = {m: [] for m in methods}
            times = {m: [] for m in methods}
            classes = [c for c in ds.classes() if np.sum(ds.labels == c) >= 2]
            for rep in range(repetitions):
                rep_prec = {m: [] for m in methods}
                for ci, cls in enumerate(classes):
                    s = _seed_for(seed, rep, ci)
                    split = make_one_class_split(ds, cls, s,
                                                 config.unlabeled_fraction if semi else 0.0)
                    for m, (prec, secs, _) in evaluate_split(split, methods, config, s).items():
                        rep_prec[m].append(prec)
                        times[m].append(secs)
                for m in methods:
                    per_run[m].append(float(np.mean(rep_prec[m])))
            for m in methods:
                runs = np.array(per_run[m])
                std = float(runs.std(ddof=1)) if runs.size > 1 else 0.0
                rows.append(BenchmarkRow(name, m, float(runs.mean()), std,
                                         float(np.mean(times[m])), int(runs.size)))
        except (BayesDDError, OSError) as exc:
            for m in methods:
                rows.append(BenchmarkRow(name, m, math.nan, math.nan, math.nan, 0,
                                         error=f"{type(exc).__name__}: {exc}"))
    return rows


def paired_runs(dataset, methods, repetitions=10, seed=0, config=None):
    """Per-run class-averaged precision for each method on shared splits."""
    config = config or ExperimentConfig()
    ds = load_dataset(dataset) if isinstance(dataset, str) else dataset
    semi = config.semi_supervised or "ssdd" in methods
    classes = ds.classes()
    out = {m: [] for m in methods}
    for rep in range(repetitions):
        acc = {m: [] for m in methods}
        for ci, cls in enumerate(classes):
            s = _seed_for(seed, rep, ci)
            split = make_one_class_split(ds, cls, s, config.unlabeled_fraction if semi else 0.0)
            for m, (prec, _, _) in evaluate_split(split, methods, config, s).items():
                acc[m].append(prec)
        for m in methods:
            out[m].append(float(np.mean(acc[m])))
    return {m: np.array(v) for m, v in out.items()}


def outlier_counts(n_targets, ratio):
    """Outliers needed so they make up ``ratio`` of a test set with ``n_targets`` targets."""
    if not 0.0 <= ratio < 1.0:
        raise ParameterError(f"outlier ratio must lie in [0, 1), got {ratio}")
    return int(round(ratio * n_targets / (1.0 - ratio)))


def outlier_ratio_sweep(dataset, ratios, methods, seeds, config=None, target_classes=None):
    """Precision@k as the outlier share of the test set grows.

    Each (seed, class) split is trained once per method; for every ratio the
    test outliers are subsampled (nested subsets, one seeded order) to reach
    that share. Rows are ``(ratio, method, seed, precision)`` with precision
    averaged over target classes.
    """
    config = config or ExperimentConfig()
    ds = load_dataset(dataset) if isinstance(dataset, str) else dataset
    classes = list(target_classes) if target_classes is not None else ds.classes()
    rows = []
    for seed in seeds:
        acc = {(r, m): [] for r in ratios for m in methods}
        for ci, cls in enumerate(classes):
            s = _seed_for(seed, 0, ci)
            split = make_one_class_split(ds, cls, s, 0.0)
            results = evaluate_split(split, methods, config, s)
            _, Z, _ = _prepare_split(split, config)
            t_idx = np.flatnonzero(split.test_is_target)
            o_idx = np.flatnonzero(~split.test_is_target)
            o_order = o_idx[shuffled_indices(o_idx.size, s + 1)]
            for r in ratios:
                need = outlier_counts(t_idx.size, r)
                if need > o_idx.size:
                    best = o_idx.size / (o_idx.size + t_idx.size)
                    raise ParameterError(
                        f"ratio {r} needs {need} outliers for class {cls!r} but only "
                        f"{o_idx.size} exist; maximum achievable ratio is {best:.4f}")
                keep = np.concatenate((t_idx, np.sort(o_order[:need])))
                for m in methods:
                    scores = results[m][2].score(Z[keep])
                    acc[(r, m)].append(precision_for_scores(scores, split.test_is_target[keep]))
        for r in ratios:
            for m in methods:
                rows.append({"ratio": float(r), "method": m, "seed": int(seed),
                             "precision": float(np.mean(acc[(r, m)]))})
    return rows


def summarize_sweep(rows):
    """Mean precision per (ratio, method)."""
    groups = {}
    for row in rows:
        groups.setdefault((row["ratio"], row["method"]), []).append(row["precision"])
    return {key: float(np.mean(v)) for key, v in sorted(groups.items())}


def write_benchmark(rows, csv_path=None, json_path=None, config=None):
    fields = ["dataset", "method", "mean_precision", "std_precision", "mean_runtime", "runs",
              "error"]
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
            w.writeheader()
            for row in rows:
                w.writerow(asdict(row))
    if json_path:
        doc = {"rows": [asdict(r) for r in rows]}
        if config is not None:
            doc["config"] = config
        with open(json_path, "w") as fh:
            json.dump(doc, fh, indent=1)


def write_sweep(rows, csv_path):
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["ratio", "method", "seed", "precision"],
                           lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(row)
