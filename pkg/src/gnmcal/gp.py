"""Squared-exponential Gaussian-process regression.

Inputs and targets are standardized before fitting, and hyperparameters
(``GPHyper``) live in that standardized space. The model is

    k(a, b) = s2 * exp(-0.5 * sum_d ((a_d - b_d) / l_d)^2),   y = f + eps,  eps ~ N(0, sn2)

and hyperparameters are fitted by maximizing the log marginal likelihood in
log space with L-BFGS-B from several deterministic starts.
"""
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from .rng import stream

NOISE_FLOOR = 1e-8
JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)

LOG_SIGNAL_BOUNDS = (math.log(1e-3), math.log(1e3))
LOG_LENGTH_BOUNDS = (math.log(1e-1), math.log(1e2))
LOG_NOISE_BOUNDS = (math.log(NOISE_FLOOR), math.log(1.0))


class GPConditioningError(LinAlgError):
    """Covariance matrix could not be factorized even with maximal jitter."""

    def __init__(self, min_eig):
        self.min_eig = min_eig
        super().__init__(f"covariance is not positive definite after jitter "
                         f"{JITTERS[-1]:g}; smallest eigenvalue estimate {min_eig:.3e}")


@dataclass(frozen=True)
class GPHyper:
    signal_variance: float
    length_scales: tuple
    noise_variance: float = NOISE_FLOOR

    def __post_init__(self):
        ls = tuple(float(v) for v in np.atleast_1d(self.length_scales))
        object.__setattr__(self, "length_scales", ls)
        if not self.signal_variance > 0 or not all(v > 0 for v in ls):
            raise ValueError("signal variance and length scales must be positive")
        if not self.noise_variance >= NOISE_FLOOR * (1 - 1e-12):
            raise ValueError(f"noise variance must be >= {NOISE_FLOOR:g}")

    def to_log(self):
        return np.log([self.signal_variance, *self.length_scales, self.noise_variance])

    @classmethod
    def from_log(cls, p):
        p = np.exp(np.asarray(p, dtype=np.float64))
        return cls(float(p[0]), tuple(p[1:-1]), max(float(p[-1]), NOISE_FLOOR))


@dataclass(frozen=True, eq=False)
class GPModel:
    """Fitted GP; ``chol`` and ``weights`` refer to the standardized problem."""

    inputs: np.ndarray
    targets: np.ndarray
    hyper: GPHyper
    chol: np.ndarray
    weights: np.ndarray
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float
    jitter: float
    log_likelihood: float

    @property
    def dim(self):
        return self.inputs.shape[1]

    def covariance(self):
        """K + (noise + jitter) I for the standardized training inputs."""
        z = (self.inputs - self.x_mean) / self.x_scale
        k = se_kernel(z, z, self.hyper.signal_variance, self.hyper.length_scales)
        k[np.diag_indices_from(k)] += self.hyper.noise_variance + self.jitter
        return k


def se_kernel(a, b, signal_variance, length_scales):
    ls = np.asarray(length_scales, dtype=np.float64)
    d2 = cdist(np.asarray(a, dtype=np.float64) / ls, np.asarray(b, dtype=np.float64) / ls,
               "sqeuclidean")
    return signal_variance * np.exp(-0.5 * d2)


def _as_2d(inputs):
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("inputs must be a vector or an (n, d) array")
    return x


def _factor(k, noise):
    """Cholesky of k + (noise + jitter) I with progressive jitter."""
    for jitter in JITTERS:
        a = k.copy()
        a[np.diag_indices_from(a)] += noise + jitter
        try:
            return cholesky(a, lower=True, check_finite=False), jitter
        except LinAlgError:
            continue
    a = k.copy()
    a[np.diag_indices_from(a)] += noise
    raise GPConditioningError(float(np.linalg.eigvalsh(a).min()))


def log_marginal_likelihood(log_params, z, t, eval_gradient=False):
    """Log marginal likelihood of standardized data and its log-space gradient.

    ``log_params`` is ``[log s2, log l_1, ..., log l_d, log sn2]``.
    """
    log_params = np.asarray(log_params, dtype=np.float64)
    s2 = math.exp(log_params[0])
    ls = np.exp(log_params[1:-1])
    sn2 = math.exp(log_params[-1])
    n = z.shape[0]
    kf = se_kernel(z, z, s2, ls)
    chol, _ = _factor(kf, sn2)
    alpha = cho_solve((chol, True), t, check_finite=False)
    lml = -0.5 * t @ alpha - np.log(np.diag(chol)).sum() - 0.5 * n * math.log(2 * math.pi)
    if not eval_gradient:
        return lml
    w = np.outer(alpha, alpha) - cho_solve((chol, True), np.eye(n), check_finite=False)
    grad = np.empty_like(log_params)
    grad[0] = 0.5 * np.sum(w * kf)
    for d in range(z.shape[1]):
        sq = (z[:, d, None] - z[None, :, d]) ** 2 / ls[d] ** 2
        grad[1 + d] = 0.5 * np.sum(w * kf * sq)
    grad[-1] = 0.5 * sn2 * np.trace(w)
    return lml, grad


def heuristic_hyper(z, t):
    """Median-distance length scales, target variance, 1e-4 relative noise."""
    ls = []
    for d in range(z.shape[1]):
        diff = np.abs(z[:, d, None] - z[None, :, d])[np.triu_indices(z.shape[0], 1)]
        diff = diff[diff > 0]
        ls.append(float(np.median(diff)) if diff.size else 1.0)
    var = float(np.var(t)) if np.var(t) > 0 else 1.0
    return GPHyper(var, tuple(ls), max(1e-4 * var, NOISE_FLOOR))


def _bounds(d):
    return [LOG_SIGNAL_BOUNDS] + [LOG_LENGTH_BOUNDS] * d + [LOG_NOISE_BOUNDS]


def optimize_hyper(z, t, seed=0, n_starts=5):
    """Maximize the log marginal likelihood from ``n_starts`` seeded starts.

    The first start is the median heuristic; the others perturb it by up to
    a factor ``e`` in each log-parameter. Falls back to the heuristic if no
    start produces a finite optimum.
    """
    base = heuristic_hyper(z, t)
    bounds = _bounds(z.shape[1])
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    p0 = np.clip(base.to_log(), lo, hi)
    gen = stream(seed, 101)
    starts = [p0] + [np.clip(p0 + gen.uniform(-1.0, 1.0, p0.size), lo, hi)
                     for _ in range(max(n_starts, 1) - 1)]

    def objective(p):
        try:
            val, grad = log_marginal_likelihood(p, z, t, eval_gradient=True)
        except GPConditioningError:
            return 1e25, np.zeros_like(p)
        if not np.isfinite(val):
            return 1e25, np.zeros_like(p)
        return -val, -grad

    best_p, best_val = None, np.inf
    for p in starts:
        res = minimize(objective, p, jac=True, method="L-BFGS-B", bounds=bounds)
        if np.isfinite(res.fun) and res.fun < best_val:
            best_p, best_val = res.x, res.fun
    if best_p is None or best_val >= 1e25:
        return base
    return GPHyper.from_log(best_p)


def _standardize(x, t):
    x_mean = x.mean(axis=0)
    x_scale = x.std(axis=0)
    x_scale = np.where(x_scale > 0, x_scale, 1.0)
    y_mean = float(t.mean())
    y_scale = float(t.std())
    if not y_scale > 0:
        y_scale = 1.0
    return x_mean, x_scale, y_mean, y_scale


def gp_fit(inputs, targets, hyper="optimize", seed=0, n_starts=5, max_opt_points=None):
    """Fit a GP to ``(inputs, targets)``.

    Parameters
    ----------
    inputs : array_like, shape (n,) or (n, d)
        Training inputs, ``d`` of 1 or 2.
    targets : array_like, shape (n,)
    hyper : GPHyper, "optimize" or "heuristic"
        Fixed hyperparameters (standardized space), likelihood maximization,
        or the median-distance heuristic without optimization.
    seed : int
        Seeds the optimizer restarts and any subsampling.
    n_starts : int
    max_opt_points : int, optional
        Optimize hyperparameters on a seeded subsample of at most this many
        points, then condition on all of them.

    Returns
    -------
    GPModel
    """
    x = _as_2d(inputs)
    t = np.asarray(targets, dtype=np.float64).ravel()
    if x.shape[0] != t.size:
        raise ValueError("inputs and targets differ in length")
    if t.size < 2:
        raise ValueError("a GP needs at least 2 training points")
    if x.shape[1] not in (1, 2):
        raise ValueError(f"input dimension must be 1 or 2, got {x.shape[1]}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(t))):
        raise ValueError("training data must be finite")
    x_mean, x_scale, y_mean, y_scale = _standardize(x, t)
    z = (x - x_mean) / x_scale
    s = (t - y_mean) / y_scale

    if isinstance(hyper, GPHyper):
        if len(hyper.length_scales) != x.shape[1]:
            raise ValueError("one length scale per input dimension is required")
    elif hyper == "heuristic":
        hyper = heuristic_hyper(z, s)
    elif hyper == "optimize":
        zo, so = z, s
        if max_opt_points is not None and t.size > max_opt_points:
            keep = np.sort(stream(seed, 102).permutation(t.size)[:max_opt_points])
            zo, so = z[keep], s[keep]
        hyper = optimize_hyper(zo, so, seed=seed, n_starts=n_starts)
    else:
        raise ValueError(f"unknown hyper option {hyper!r}")

    kf = se_kernel(z, z, hyper.signal_variance, hyper.length_scales)
    chol, jitter = _factor(kf, hyper.noise_variance)
    alpha = cho_solve((chol, True), s, check_finite=False)
    lml = float(-0.5 * s @ alpha - np.log(np.diag(chol)).sum() - 0.5 * s.size * math.log(2 * math.pi))
    x.setflags(write=False)
    return GPModel(x, t, hyper, chol, alpha, x_mean, x_scale, y_mean, y_scale, jitter, lml)


def gp_predict(model, query, return_var=True):
    """Posterior mean and variance (of the latent function) at ``query``.

    ``query`` may be a single point or an array of points; scalars and 1-d
    arrays are treated as 1-d inputs when the model is 1-d. Returns arrays
    (or floats for a single point). With ``return_var=False`` the variance
    is skipped and returned as ``None``.
    """
    q = np.asarray(query, dtype=np.float64)
    single = q.ndim == 0 or (q.ndim == 1 and model.dim > 1 and q.size == model.dim)
    if model.dim == 1:
        q = q.reshape(-1, 1)
    else:
        q = q.reshape(-1, model.dim)
    z = (model.inputs - model.x_mean) / model.x_scale
    zq = (q - model.x_mean) / model.x_scale
    h = model.hyper
    ks = se_kernel(zq, z, h.signal_variance, h.length_scales)
    # row-wise reduction: a point's mean does not depend on the batch it is in
    mean = model.y_mean + model.y_scale * np.sum(ks * model.weights, axis=1)
    if not return_var:
        return (float(mean[0]) if single else mean), None
    v = solve_triangular(model.chol, ks.T, lower=True, check_finite=False)
    var = np.maximum(h.signal_variance - np.sum(v * v, axis=0), 0.0)
    var = model.y_scale ** 2 * var
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def with_noise(hyper, noise_variance):
    return replace(hyper, noise_variance=noise_variance)
