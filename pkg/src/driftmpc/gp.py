"""Zero-mean Gaussian-process regression with a Matern-5/2 kernel.

Inputs are normalized to the unit box inside the model (the tuned
parameters span scales from ~0.1 rad to ~10), with per-dimension
lengthscales living in the normalized space.  Hyperparameters are chosen
by multi-start maximization of the log marginal likelihood.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize

from .errors import ConfigError

SQRT5 = math.sqrt(5.0)
MAX_JITTER_FACTOR = 1e-6


@dataclass(frozen=True)
class GpDataset:
    thetas: np.ndarray          # (n, d) raw parameter points
    costs: np.ndarray           # (n,) noisy observations
    noise_var: float | None = None  # fixed observation noise, None = learned

    def __post_init__(self):
        object.__setattr__(self, "thetas", np.atleast_2d(np.asarray(self.thetas, float)))
        object.__setattr__(self, "costs", np.asarray(self.costs, float).ravel())
        if len(self.thetas) != len(self.costs):
            raise ConfigError("thetas and costs must have equal length")
        if not np.all(np.isfinite(self.thetas)) or not np.all(np.isfinite(self.costs)):
            raise ConfigError("dataset contains non-finite values")


def matern52(theta_i, theta_j, sigma_eta2: float, lengthscales) -> float:
    """Matern-5/2 covariance between two points.

    The distance is the Euclidean norm of the elementwise-scaled
    difference, so anisotropic lengthscales are supported.
    """
    diff = (np.asarray(theta_i, float) - np.asarray(theta_j, float)) \
        / np.asarray(lengthscales, float)
    rho = float(np.linalg.norm(diff))
    return sigma_eta2 * (1.0 + SQRT5 * rho + (5.0 / 3.0) * rho * rho) \
        * math.exp(-SQRT5 * rho)


def matern52_matrix(Xa: np.ndarray, Xb: np.ndarray, sigma_eta2: float,
                    lengthscales: np.ndarray) -> np.ndarray:
    A = Xa / lengthscales
    Bm = Xb / lengthscales
    d2 = np.maximum(
        (A * A).sum(axis=1)[:, None] + (Bm * Bm).sum(axis=1)[None, :]
        - 2.0 * A @ Bm.T, 0.0)
    rho = np.sqrt(d2)
    return sigma_eta2 * (1.0 + SQRT5 * rho + (5.0 / 3.0) * d2) * np.exp(-SQRT5 * rho)


@dataclass
class GpModel:
    x_norm: np.ndarray        # (n, d) normalized training inputs
    y: np.ndarray             # (n,) observations (zero prior mean, uncentered)
    lo: np.ndarray            # (d,) box used for normalization
    hi: np.ndarray
    sigma_eta2: float         # signal variance
    lengthscales: np.ndarray  # (d,) in normalized space
    noise_var: float          # observation noise variance
    chol: tuple               # cho_factor of K + noise I (+ jitter)
    alpha: np.ndarray         # (K + noise I)^-1 y
    jitter: float

    def normalize(self, thetas: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(np.asarray(thetas, float)) - self.lo) / (self.hi - self.lo)


def _merge_duplicates(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Average observations taken at identical inputs."""
    seen: dict[bytes, list[int]] = {}
    for i, row in enumerate(X):
        seen.setdefault(row.tobytes(), []).append(i)
    if all(len(v) == 1 for v in seen.values()):
        return X, y
    keep, vals = [], []
    for key, idxs in seen.items():
        keep.append(idxs[0])
        vals.append(float(np.mean(y[idxs])))
    keep_idx = np.array(sorted(range(len(keep)), key=lambda i: keep[i]))
    return X[np.array(keep)[keep_idx]], np.array(vals)[keep_idx]


def _factor(K: np.ndarray, noise_var: float, sigma_eta2: float):
    jitter = 0.0
    target = K + noise_var * np.eye(len(K))
    for _ in range(8):
        try:
            return cho_factor(target + jitter * np.eye(len(K)), lower=True), jitter
        except np.linalg.LinAlgError:
            jitter = max(jitter * 10.0, 1e-12 * sigma_eta2)
            if jitter > MAX_JITTER_FACTOR * sigma_eta2:
                break
    raise ConfigError("kernel matrix is not positive definite even with jitter")


def _neg_lml(log_params: np.ndarray, X: np.ndarray, y: np.ndarray,
             fixed_noise: float | None) -> float:
    d = X.shape[1]
    ell = np.exp(log_params[:d])
    sigma_eta2 = math.exp(log_params[d])
    noise = fixed_noise if fixed_noise is not None else math.exp(log_params[d + 1])
    K = matern52_matrix(X, X, sigma_eta2, ell)
    try:
        chol, _ = _factor(K, noise, sigma_eta2)
    except ConfigError:
        return 1e12
    alpha = cho_solve(chol, y)
    logdet = 2.0 * float(np.log(np.diag(chol[0])).sum())
    return float(0.5 * y @ alpha + 0.5 * logdet + 0.5 * len(y) * math.log(2 * math.pi))


def gp_fit(dataset: GpDataset, lo, hi, *, n_starts: int = 8, seed: int = 0,
           hypers: tuple | None = None) -> GpModel:
    """Fit the GP: normalize inputs, choose hyperparameters, cache the factor.

    hypers, when given as (lengthscales, sigma_eta2, noise_var), skips the
    marginal-likelihood search (used when refitting between scheduled
    hyperparameter updates).
    """
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    X_raw = dataset.thetas
    if X_raw.shape[0] < 2:
        raise ConfigError("need at least 2 observations to fit")
    X = (X_raw - lo) / (hi - lo)
    y = dataset.costs.copy()
    X, y = _merge_duplicates(X, y)
    d = X.shape[1]
    var_y = float(np.var(y))
    if var_y <= 0.0:
        var_y = 1.0

    if hypers is not None:
        ell, sigma_eta2, noise_var = hypers
        ell = np.asarray(ell, float)
    else:
        ell_b = (math.log(0.01), math.log(10.0))
        sig_b = (math.log(1e-4 * var_y), math.log(1e2 * var_y))
        if dataset.noise_var is not None:
            bounds = [ell_b] * d + [sig_b]
        else:
            noise_b = (math.log(1e-8 * var_y), math.log(1.0 * var_y))
            bounds = [ell_b] * d + [sig_b] + [noise_b]
        rng = np.random.default_rng(seed)
        starts = [np.array([math.log(0.3)] * d + [math.log(var_y)]
                           + ([] if dataset.noise_var is not None
                              else [math.log(1e-4 * var_y)]))]
        for _ in range(n_starts - 1):
            starts.append(np.array([rng.uniform(b[0], b[1]) for b in bounds]))
        # rank the starts by their raw likelihood and polish only the best
        # half; the rest rarely win and double the fitting cost
        ranked = sorted(starts,
                        key=lambda x0: _neg_lml(x0, X, y, dataset.noise_var))
        best = None
        for x0 in ranked[:max(n_starts // 2, 1)]:
            res = minimize(_neg_lml, x0, args=(X, y, dataset.noise_var),
                           method="L-BFGS-B", bounds=bounds,
                           options={"maxiter": 60, "ftol": 1e-10})
            if best is None or res.fun < best.fun:
                best = res
        p = best.x
        ell = np.exp(p[:d])
        sigma_eta2 = math.exp(p[d])
        noise_var = dataset.noise_var if dataset.noise_var is not None \
            else math.exp(p[d + 1])

    K = matern52_matrix(X, X, sigma_eta2, ell)
    chol, jitter = _factor(K, noise_var, sigma_eta2)
    alpha = cho_solve(chol, y)
    return GpModel(x_norm=X, y=y, lo=lo, hi=hi, sigma_eta2=float(sigma_eta2),
                   lengthscales=ell, noise_var=float(noise_var), chol=chol,
                   alpha=alpha, jitter=jitter)


def gp_predict(model: GpModel, theta) -> tuple[float, float]:
    """Posterior mean and (non-negative) latent variance at one point."""
    mu, var = gp_predict_batch(model, np.atleast_2d(np.asarray(theta, float)))
    return float(mu[0]), float(var[0])


def gp_predict_batch(model: GpModel, thetas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Xs = model.normalize(thetas)
    k_star = matern52_matrix(Xs, model.x_norm, model.sigma_eta2, model.lengthscales)
    mu = k_star @ model.alpha
    v = cho_solve(model.chol, k_star.T)
    var = model.sigma_eta2 - np.einsum("ij,ji->i", k_star, v)
    var = np.where(var < 1e-12, 0.0, var)
    return mu, var
