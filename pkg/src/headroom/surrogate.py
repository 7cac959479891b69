"""Exact GP regression (isotropic Matern-5/2) and Expected Improvement."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.stats import norm

log = logging.getLogger(__name__)

SQRT5 = np.sqrt(5.0)
JITTERS = (0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2)
MAX_POINTS = 2000


class GPError(RuntimeError):
    pass


@dataclass(frozen=True)
class GPConfig:
    starts: int = 8
    seed: int = 0
    lengthscale_bounds: tuple[float, float] = (0.1, 1000.0)
    signal_bounds: tuple[float, float] = (0.05, 20.0)
    noise_bounds: tuple[float, float] = (1e-6, 1.0)
    max_points: int = MAX_POINTS
    maxiter: int = 60


def default_hyperparameters(dim: int) -> tuple[float, float, float]:
    """(lengthscale, signal variance, noise variance) used when fitting fails."""
    return float(np.sqrt(dim)), 1.0, 1e-4


def sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.maximum(d, 0.0)


def matern52(r: np.ndarray, lengthscale: float, signal_var: float) -> np.ndarray:
    s = SQRT5 * r / lengthscale
    return signal_var * (1.0 + s + s * s / 3.0) * np.exp(-s)


def _cholesky(K: np.ndarray) -> tuple[np.ndarray, float]:
    n = len(K)
    for jitter in JITTERS:
        try:
            return cholesky(K + jitter * np.eye(n), lower=True, check_finite=False), jitter
        except np.linalg.LinAlgError:
            continue
    raise GPError("covariance not positive definite after maximum jitter")


def log_marginal_likelihood(X, y, lengthscale: float, signal_var: float, noise_var: float,
                            r: np.ndarray | None = None) -> float:
    """Exact Gaussian log marginal likelihood of targets ``y`` (used as given)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if r is None:
        r = np.sqrt(sq_dists(X, X))
    K = matern52(r, lengthscale, signal_var) + noise_var * np.eye(len(y))
    L, _ = _cholesky(K)
    alpha = cho_solve((L, True), y, check_finite=False)
    return float(-0.5 * y @ alpha - np.log(np.diag(L)).sum() - 0.5 * len(y) * np.log(2 * np.pi))


def _nll_and_grad(theta, r, y):
    """Negative LML and its gradient in (log l, log sf2, log sn2)."""
    ell, sf2, sn2 = np.exp(theta)
    n = len(y)
    s = SQRT5 * r / ell
    e = np.exp(-s)
    Kf = sf2 * (1.0 + s + s * s / 3.0) * e
    K = Kf + sn2 * np.eye(n)
    L, _ = _cholesky(K)
    alpha = cho_solve((L, True), y, check_finite=False)
    nll = 0.5 * y @ alpha + np.log(np.diag(L)).sum() + 0.5 * n * np.log(2 * np.pi)
    W = np.outer(alpha, alpha) - cho_solve((L, True), np.eye(n), check_finite=False)
    dK_dlogl = sf2 * (s * s / 3.0) * (1.0 + s) * e
    grads = [dK_dlogl, Kf, sn2 * np.eye(n)]
    g = np.array([-0.5 * np.sum(W * d) for d in grads])
    return float(nll), g


@dataclass(frozen=True)
class GPModel:
    X: np.ndarray
    y_raw: np.ndarray
    y_mean: float
    y_scale: float
    lengthscale: float
    signal_var: float
    noise_var: float
    L: np.ndarray
    alpha: np.ndarray

    @property
    def y(self) -> np.ndarray:
        return (self.y_raw - self.y_mean) / self.y_scale

    def hyperparameters(self) -> tuple[float, float, float]:
        return self.lengthscale, self.signal_var, self.noise_var

    def log_marginal_likelihood(self) -> float:
        return log_marginal_likelihood(self.X, self.y, *self.hyperparameters())

    def posterior(self, Z) -> tuple[np.ndarray, np.ndarray]:
        """Predictive mean and latent-function variance at rows of ``Z`` (original scale)."""
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        if not np.all(np.isfinite(Z)):
            raise ValueError("posterior query has non-finite coordinates")
        Ks = matern52(np.sqrt(sq_dists(Z, self.X)), self.lengthscale, self.signal_var)
        mean = Ks @ self.alpha
        v = solve_triangular(self.L, Ks.T, lower=True, check_finite=False)
        var = np.maximum(self.signal_var - (v * v).sum(0), 0.0)
        return self.y_mean + self.y_scale * mean, var * self.y_scale ** 2


def standardize(y: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(y))
    scale = float(np.std(y))
    return mean, (scale if scale > 0 else 1.0)


def build_model(X, y, lengthscale: float, signal_var: float, noise_var: float,
                standardize_targets: bool = True) -> GPModel:
    """Condition a GP with fixed hyperparameters on ``(X, y)``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if len(X) != len(y) or len(y) == 0:
        raise ValueError("X and y must be nonempty and aligned")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite training data")
    mean, scale = standardize(y) if standardize_targets else (0.0, 1.0)
    ys = (y - mean) / scale
    K = matern52(np.sqrt(sq_dists(X, X)), lengthscale, signal_var) + noise_var * np.eye(len(y))
    L, _ = _cholesky(K)
    alpha = cho_solve((L, True), ys, check_finite=False)
    return GPModel(X, y, mean, scale, float(lengthscale), float(signal_var), float(noise_var), L, alpha)


def select_training_points(y: np.ndarray, max_points: int, n_best: int = 200) -> np.ndarray:
    """Indices kept for an exact GP: the best ``n_best`` plus the most recent rest."""
    n = len(y)
    if n <= max_points:
        return np.arange(n)
    best = set(np.argsort(-y, kind="stable")[:n_best].tolist())
    keep = sorted(best)
    for i in range(n - 1, -1, -1):
        if len(keep) >= max_points:
            break
        if i not in best:
            keep.append(i)
    return np.array(sorted(keep))


def fit(X, y, config: GPConfig = GPConfig(), warm_start=None) -> GPModel:
    """Fit hyperparameters by multi-start L-BFGS-B on the log marginal likelihood.

    Start 0 is the default hyperparameters (or ``warm_start``); the rest are
    log-uniform draws from the bounds using ``config.seed``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if len(y) < 2:
        raise ValueError("fit needs at least 2 observations")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite training data")
    keep = select_training_points(y, config.max_points)
    X, y = X[keep], y[keep]
    mean, scale = standardize(y)
    ys = (y - mean) / scale
    r = np.sqrt(sq_dists(X, X))

    bounds = [tuple(np.log(b)) for b in (config.lengthscale_bounds, config.signal_bounds, config.noise_bounds)]
    lo, hi = np.array([b[0] for b in bounds]), np.array([b[1] for b in bounds])
    first = np.clip(np.log(warm_start or default_hyperparameters(X.shape[1])), lo, hi)
    rng = np.random.default_rng(config.seed)
    starts = [first] + [rng.uniform(lo, hi) for _ in range(config.starts - 1)]

    best_theta, best_nll = None, np.inf
    for theta0 in starts:
        try:
            nll0, _ = _nll_and_grad(theta0, r, ys)
            if nll0 < best_nll:
                best_theta, best_nll = theta0, nll0
            res = minimize(_nll_and_grad, theta0, args=(r, ys), jac=True, method="L-BFGS-B",
                           bounds=bounds, options={"maxiter": config.maxiter})
            if np.isfinite(res.fun) and res.fun < best_nll:
                best_theta, best_nll = np.clip(res.x, lo, hi), float(res.fun)
        except (GPError, np.linalg.LinAlgError, ValueError) as exc:
            log.debug("GP start failed: %s", exc)
    if best_theta is None:
        log.warning("GP hyperparameter search failed; using defaults")
        hp = default_hyperparameters(X.shape[1])
    else:
        hp = tuple(float(v) for v in np.exp(best_theta))
    return build_model(X, y, *hp)


def expected_improvement(mean, variance, best) -> np.ndarray:
    """Closed-form EI for maximization; exact ``max(0, mean - best)`` at zero variance."""
    mean = np.asarray(mean, dtype=np.float64)
    sigma = np.sqrt(np.maximum(np.asarray(variance, dtype=np.float64), 0.0))
    diff = mean - best
    safe = np.where(sigma > 0, sigma, 1.0)
    u = np.clip(diff / safe, -50.0, 50.0)
    ei = np.where(sigma > 0, diff * norm.cdf(u) + safe * norm.pdf(u), np.maximum(diff, 0.0))
    return np.maximum(ei, 0.0)
