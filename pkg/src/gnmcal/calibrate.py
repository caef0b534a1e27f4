"""GNM calibration pipeline and the parametric (PFC) baseline."""
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize

from .gp import GPHyper, GPModel, NOISE_FLOOR, gp_fit, gp_predict, with_noise
from .graph import LayeredGraph, build_graph
from .rng import stream
from .shortest_path import AnchorPath, shortest_anchor_path


@dataclass(frozen=True)
class GPConfig:
    """How GPs are trained.

    ``hyper`` fixes hyperparameters (standardized space) and wins over
    ``optimize``; ``max_opt_points`` caps the hyperparameter search of the
    surface surrogate.
    """

    optimize: bool = True
    hyper: Optional[GPHyper] = None
    n_starts: int = 5
    max_opt_points: int = 256
    seed: int = 0

    @property
    def mode(self):
        if self.hyper is not None:
            return self.hyper
        return "optimize" if self.optimize else "heuristic"


@dataclass(frozen=True)
class ResponseEvaluator:
    """Model response at arbitrary ``(x, theta)``: closed form or GP surrogate."""

    kind: str
    theta_range: tuple
    fn: Optional[Callable] = None
    gp: Optional[GPModel] = None

    @classmethod
    def analytic(cls, truth):
        return cls("analytic", tuple(truth.theta_range), fn=truth.model_response)

    @classmethod
    def surrogate(cls, gp):
        th = gp.inputs[:, 1]
        return cls("surrogate", (float(th.min()), float(th.max())), gp=gp)

    def __call__(self, x, theta):
        x, theta = np.broadcast_arrays(np.asarray(x, dtype=np.float64),
                                       np.asarray(theta, dtype=np.float64))
        if self.kind == "analytic":
            return np.asarray(self.fn(x, theta), dtype=np.float64)
        mean, _ = gp_predict(self.gp, np.column_stack([x.ravel(), theta.ravel()]),
                             return_var=False)
        return np.asarray(mean).reshape(x.shape)


def fit_surrogate(model, gp_config=None):
    """GP over ``(x, theta)`` that interpolates the model responses.

    Hyperparameters are learned (on at most ``max_opt_points`` points) and
    the final fit conditions on every model point with noise at the floor.
    """
    cfg = gp_config or GPConfig()
    if len(model) < 4:
        raise ValueError(f"a surrogate needs at least 4 model points, got {len(model)}")
    inputs = np.column_stack([model.x, model.theta])
    mode = cfg.mode
    if isinstance(mode, str):
        hyper = gp_fit(inputs, model.y, hyper=mode, seed=cfg.seed, n_starts=cfg.n_starts,
                       max_opt_points=cfg.max_opt_points).hyper
    else:
        hyper = mode
    gp = gp_fit(inputs, model.y, hyper=with_noise(hyper, NOISE_FLOOR))
    return ResponseEvaluator.surrogate(gp)


@dataclass(frozen=True, eq=False)
class CalibrationModel:
    """Fitted GNM calibration: anchors, calibration GP and response evaluator."""

    calib_fn: GPModel
    anchors: AnchorPath
    evaluator: ResponseEvaluator
    lam: float
    graph: LayeredGraph = field(repr=False)

    @property
    def anchor_index(self):
        return np.asarray(self.anchors.anchors, dtype=np.int64)

    @property
    def anchor_x(self):
        return self.graph.model.x[self.anchor_index]

    @property
    def anchor_theta(self):
        return self.graph.model.theta[self.anchor_index]

    @property
    def anchor_y(self):
        return self.graph.model.y[self.anchor_index]

    def predict_theta(self, x):
        mean, _ = gp_predict(self.calib_fn, np.asarray(x, dtype=np.float64), return_var=False)
        return mean


def gnm_fit(physical, model, lam, gp_config=None, terminal_response=False, evaluator=None):
    """Graph non-isometric matching.

    Builds the layered graph, takes its shortest path as anchors and fits the
    calibration GP ``theta = f(x)`` through the anchor ``(x, theta)`` pairs.
    Without an ``evaluator`` a GP surrogate of the model data is used.
    """
    cfg = gp_config or GPConfig()
    g = build_graph(physical, model, lam, terminal_response=terminal_response)
    path = shortest_anchor_path(g)
    idx = np.asarray(path.anchors)
    calib = gp_fit(model.x[idx], model.theta[idx], hyper=cfg.mode, seed=cfg.seed,
                   n_starts=cfg.n_starts)
    if evaluator is None:
        evaluator = fit_surrogate(model, cfg)
    return CalibrationModel(calib, path, evaluator, float(lam), g)


def predict_response(cal, x_star):
    """Model response at ``x_star`` with the calibrated parameter plugged in."""
    x = np.asarray(x_star, dtype=np.float64)
    theta = np.asarray(cal.predict_theta(x), dtype=np.float64)
    y = cal.evaluator(x, theta)
    return float(y) if np.ndim(x_star) == 0 else y


class PFCFitError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class PFCModel:
    """``theta = alpha * exp(-beta * x)`` fitted by least squares."""

    alpha: float
    beta: float
    evaluator: ResponseEvaluator
    objective: float
    start_objectives: tuple = ()

    def predict_theta(self, x):
        return self.alpha * np.exp(-self.beta * np.asarray(x, dtype=np.float64))


def pfc_objective(params, physical, evaluator):
    alpha, beta = params
    theta = alpha * np.exp(-beta * physical.x)
    try:
        with np.errstate(all="ignore"):
            resid = physical.y - evaluator(physical.x, theta)
    except (ValueError, FloatingPointError, ZeroDivisionError):
        return math.inf
    val = float(np.sum(resid * resid))
    return val if math.isfinite(val) else math.inf


def pfc_starts(physical, theta_range, seed):
    t_lo, t_hi = theta_range
    mid, span = 0.5 * (t_lo + t_hi), t_hi - t_lo
    x_mean = float(np.mean(physical.x))
    x_span = float(np.ptp(physical.x)) or 1.0
    r = stream(seed, 201).uniform(0.5, 1.5, 4)
    centers = [mid, mid, mid, mid + 0.25 * span * r[2], mid - 0.25 * span * r[3]]
    betas = [0.0, r[0] / x_span, -r[1] / x_span, 0.0, 0.0]
    # alpha chosen so theta(mean x) equals the center value
    return [np.array([c * math.exp(b * x_mean), b]) for c, b in zip(centers, betas)]


def pfc_fit(physical, evaluator, seed=0):
    """Parametric functional calibration by Nelder-Mead from 5 seeded starts."""
    starts = pfc_starts(physical, evaluator.theta_range, seed)
    start_vals = tuple(pfc_objective(p, physical, evaluator) for p in starts)
    best, best_val = None, math.inf
    for p, v0 in zip(starts, start_vals):
        if math.isfinite(v0) and v0 < best_val:
            best, best_val = p, v0
        with np.errstate(invalid="ignore"):   # inf - inf in the simplex test
            res = minimize(pfc_objective, p, args=(physical, evaluator), method="Nelder-Mead",
                           options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": 600})
        if math.isfinite(res.fun) and res.fun < best_val:
            best, best_val = res.x, float(res.fun)
    if best is None:
        raise PFCFitError("every PFC start produced a non-finite objective")
    return PFCModel(float(best[0]), float(best[1]), evaluator, best_val, start_vals)
