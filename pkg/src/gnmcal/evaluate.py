"""Error metrics, cross-validation, lambda selection and the experiment protocol."""
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .calibrate import (GPConfig, PFCModel, ResponseEvaluator, fit_surrogate, gnm_fit,
                        pfc_fit, predict_response)
from .dataset import generate_synthetic, get_truth
from .gp import GPConditioningError
from .graph import EmptyClusterError
from .rng import stream

DEFAULT_GRID = tuple(round(0.05 * k, 2) for k in range(21))

# (m, n) used for the training-error and cross-validated test-error runs
DEFAULT_SIZES = {"train": (15, 450), "test": (30, 900)}


def derive_seed(seed, *keys):
    return int(stream(seed, *keys).next_u64(1)[0] >> np.uint64(1))


def worker_count():
    """Worker threads from ``GNM_THREADS`` (unset: 1, 0: one per CPU)."""
    raw = os.environ.get("GNM_THREADS", "").strip()
    if not raw:
        return 1
    n = int(raw)
    return (os.cpu_count() or 1) if n <= 0 else n


def _pmap(fn, items, workers=None):
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class MetricReport:
    """``paper_rmse`` is the plain sum of squared errors; ``conventional_rmse``
    is ``sqrt(paper_rmse / n_points)``."""

    paper_rmse: float
    conventional_rmse: float
    n_points: int


def _metric(predicted, actual):
    p = np.asarray(predicted, dtype=np.float64).ravel()
    a = np.asarray(actual, dtype=np.float64).ravel()
    if p.size != a.size:
        raise ValueError(f"length mismatch: {p.size} predictions for {a.size} targets")
    if p.size == 0:
        raise ValueError("metrics need at least one point")
    sse = float(np.sum((p - a) ** 2))
    return MetricReport(sse, math.sqrt(sse / p.size), int(p.size))


def metric_response(predicted, actual):
    return _metric(predicted, actual)


def metric_theta(predicted_theta, actual_theta):
    return _metric(predicted_theta, actual_theta)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def train_index(self, fold):
        return np.flatnonzero(self.assignments != fold)

    def test_index(self, fold):
        return np.flatnonzero(self.assignments == fold)


def kfold(physical, k, seed=0):
    """Balanced random fold assignment of the physical points."""
    m = len(physical)
    k = int(k)
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > m:
        raise ValueError(f"cannot split {m} points into {k} folds")
    perm = stream(seed, 401).permutation(m)
    assign = np.empty(m, dtype=np.int64)
    assign[perm] = np.arange(m) % k
    assign.setflags(write=False)
    return FoldPlan(k, assign, int(seed))


def _evaluator_for(model, truth, gp_config):
    if truth is not None:
        return ResponseEvaluator.analytic(truth)
    return fit_surrogate(model, gp_config)


def _holdout_rmse(train, test, model, lam, gp_config, evaluator, terminal_response):
    try:
        cal = gnm_fit(train, model, lam, gp_config, terminal_response, evaluator=evaluator)
    except (EmptyClusterError, GPConditioningError, ValueError):
        return None
    pred = predict_response(cal, test.x)
    return metric_response(pred, test.y)


@dataclass(frozen=True)
class LambdaSelection:
    lambda_star: float
    grid: tuple
    scores: tuple          # mean CV conventional RMSE per lambda (nan = failed on every fold)
    fold_scores: tuple     # per lambda, per fold (nan = failed)


def select_lambda(physical, model, grid=DEFAULT_GRID, gp_config=None, seed=0,
                  evaluator=None, terminal_response=False, workers=None):
    """Two-fold cross-validated choice of the smoothness weight.

    Each fold's GNM fit sees only that fold's physical points (and the full
    model data) and is scored on the other fold by conventional RMSE. The
    smallest mean score wins; ties go to the smaller lambda.
    """
    grid = tuple(float(v) for v in grid)
    if not grid:
        raise ValueError("lambda grid is empty")
    if any(not (v >= 0) for v in grid):
        raise ValueError("lambda grid values must be >= 0")
    cfg = gp_config or GPConfig()
    if evaluator is None:
        evaluator = fit_surrogate(model, cfg)
    plan = kfold(physical, 2, seed)
    splits = [(physical.subset(plan.train_index(f)), physical.subset(plan.test_index(f)))
              for f in range(2)]

    def score(lam):
        out = []
        for train, test in splits:
            rep = _holdout_rmse(train, test, model, lam, cfg, evaluator, terminal_response)
            out.append(math.nan if rep is None else rep.conventional_rmse)
        return tuple(out)

    fold_scores = _pmap(score, list(grid), workers)
    means = tuple(math.nan if all(math.isnan(s) for s in fs)
                  else float(np.nanmean(fs)) for fs in fold_scores)
    order = sorted((s, lam) for lam, s in zip(grid, means) if not math.isnan(s))
    if not order:
        raise RuntimeError("GNM failed for every lambda on both folds")
    return LambdaSelection(order[0][1], grid, means, tuple(fold_scores))


@dataclass(frozen=True)
class SweepResult:
    rows: tuple   # (lambda, mean_rmse, mean_paper_rmse, std), sorted by lambda


def sweep_lambda(physical, model, grid=DEFAULT_GRID, split_ratio=0.75, seed=0, gp_config=None,
                 evaluator=None, terminal_response=False, workers=None):
    """Hold-out test error of GNM across a lambda grid.

    One random split puts ``split_ratio`` of the physical points in training.
    ``std`` is the spread over splits, hence 0 for the single split.
    """
    cfg = gp_config or GPConfig()
    if evaluator is None:
        evaluator = fit_surrogate(model, cfg)
    m = len(physical)
    n_train = min(max(int(round(split_ratio * m)), 2), m - 1)
    perm = stream(seed, 501).permutation(m)
    train = physical.subset(np.sort(perm[:n_train]))
    test = physical.subset(np.sort(perm[n_train:]))
    grid = sorted(float(v) for v in grid)

    def run(lam):
        return _holdout_rmse(train, test, model, lam, cfg, evaluator, terminal_response)

    rows = []
    for lam, rep in zip(grid, _pmap(run, grid, workers)):
        if rep is None:
            continue
        rows.append((lam, rep.conventional_rmse, rep.paper_rmse, 0.0))
    return SweepResult(tuple(rows))


@dataclass(frozen=True)
class ExperimentConfig:
    """One train/test experiment comparing calibration methods.

    Either ``dataset`` names a builtin benchmark (sizes default to
    ``DEFAULT_SIZES``) or ``physical``/``model`` carry loaded data, which is
    then used for both phases.
    """

    dataset: str = "sd1"
    physical: Optional[object] = None
    model: Optional[object] = None
    train_size: Optional[tuple] = None
    test_size: Optional[tuple] = None
    methods: tuple = ("gnm", "pfc")
    lam: object = "cv"
    grid: tuple = DEFAULT_GRID
    gp: GPConfig = field(default_factory=GPConfig)
    terminal_response: bool = False
    k: int = 4
    seed: int = 0


@dataclass
class ExperimentReport:
    """Rows ``(dataset, method, metric, phase, value, std)``.

    ``rows`` carry the sum-of-squares metric, ``conventional_rows`` the
    root-mean-square one; ``lambdas`` records every lambda GNM used.
    """

    rows: list
    conventional_rows: list
    lambdas: dict

    def value(self, method, metric, phase, conventional=False):
        src = self.conventional_rows if conventional else self.rows
        for r in src:
            if r[1] == method and r[2] == metric and r[3] == phase:
                return r[4]
        raise KeyError((method, metric, phase))


def _fit_method(method, train, model, lam, cfg, predict_ev, pfc_ev, terminal, seed):
    if method == "gnm":
        return gnm_fit(train, model, lam, cfg, terminal, evaluator=predict_ev)
    if method == "pfc":
        pf = pfc_fit(train, pfc_ev, seed=seed)
        # fitted against the surrogate, predicted with the run's evaluator
        return PFCModel(pf.alpha, pf.beta, predict_ev, pf.objective, pf.start_objectives)
    raise ValueError(f"unknown method {method!r}")


def _choose_lambda(cfg, train, model, predict_ev, seed):
    if cfg.lam == "cv":
        return select_lambda(train, model, cfg.grid, cfg.gp, seed, predict_ev,
                             cfg.terminal_response).lambda_star
    return float(cfg.lam)


def run_experiment(cfg):
    """Training error (fit and score on all physical inputs) and k-fold test
    error for each method; test values are fold means with their sample std."""
    truth = None
    if cfg.physical is not None:
        name = "custom"
        data = {"train": (cfg.physical, cfg.model), "test": (cfg.physical, cfg.model)}
    else:
        truth = get_truth(cfg.dataset)
        name = truth.name
        sizes = {"train": cfg.train_size or DEFAULT_SIZES["train"],
                 "test": cfg.test_size or DEFAULT_SIZES["test"]}
        data = {ph: generate_synthetic(truth, *sizes[ph], seed=derive_seed(cfg.seed, 10 + i))
                for i, ph in enumerate(("train", "test"))}

    rows, conv, lambdas = [], [], {}
    for pi, phase in enumerate(("train", "test")):
        physical, model = data[phase]
        surrogate = fit_surrogate(model, cfg.gp) if ("pfc" in cfg.methods or truth is None) else None
        predict_ev = ResponseEvaluator.analytic(truth) if truth is not None else surrogate
        if phase == "train":
            splits = [(physical, physical)]
        else:
            plan = kfold(physical, cfg.k, derive_seed(cfg.seed, 20 + pi))
            splits = [(physical.subset(plan.train_index(f)), physical.subset(plan.test_index(f)))
                      for f in range(cfg.k)]
        results = {meth: {"rmse": [], "rmse_theta": []} for meth in cfg.methods}
        for fi, (train, test) in enumerate(splits):
            lam = None
            if "gnm" in cfg.methods:
                lam = _choose_lambda(cfg, train, model, predict_ev, derive_seed(cfg.seed, 30 + pi, fi))
                lambdas[(phase, fi)] = lam
            for meth in cfg.methods:
                fitted = _fit_method(meth, train, model, lam, cfg.gp, predict_ev, surrogate,
                                     cfg.terminal_response, derive_seed(cfg.seed, 40 + pi, fi))
                results[meth]["rmse"].append(metric_response(predict_response(fitted, test.x), test.y))
                if truth is not None:
                    results[meth]["rmse_theta"].append(
                        metric_theta(fitted.predict_theta(test.x), truth.true_theta(test.x)))
        for meth in cfg.methods:
            for metric in ("rmse", "rmse_theta"):
                reps = results[meth][metric]
                if not reps:
                    continue
                for out, attr in ((rows, "paper_rmse"), (conv, "conventional_rmse")):
                    vals = np.array([getattr(r, attr) for r in reps])
                    std = float(np.std(vals, ddof=1)) if vals.size > 1 else math.nan
                    out.append((name, meth, metric, phase, float(vals.mean()), std))
    return ExperimentReport(rows, conv, lambdas)


REPORT_HEADER = ("dataset", "method", "metric", "phase", "value", "std")
SWEEP_HEADER = ("lambda", "mean_rmse", "mean_paper_rmse", "std")


def _cell(v):
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


def rows_to_csv(header, rows):
    """CSV text with floats at 17 significant digits (round-trip exact)."""
    lines = [",".join(header)]
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"
