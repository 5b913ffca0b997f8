"""Bayesian-optimization supervisor: episode cost, expected improvement,
acquisition search, and the evaluate-update-acquire loop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr
from scipy.stats import qmc

from .errors import ConfigError
from .gp import GpDataset, GpModel, gp_fit, gp_predict, gp_predict_batch

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ThetaBounds:
    lo: np.ndarray = field(default_factory=lambda: np.array([-0.7, 0.0, -5.0]))
    hi: np.ndarray = field(default_factory=lambda: np.array([0.4, 2.0, 5.0]))

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, float))
        object.__setattr__(self, "hi", np.asarray(self.hi, float))
        if not np.all(self.lo < self.hi):
            raise ConfigError("bounds must satisfy lo < hi componentwise")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, theta) -> bool:
        t = np.asarray(theta, float)
        return bool(np.all(t >= self.lo - 1e-12) and np.all(t <= self.hi + 1e-12))

    def sample(self, n: int, seed: int) -> np.ndarray:
        """Scrambled low-discrepancy sample of n points in the box."""
        sob = qmc.Sobol(d=self.dim, scramble=True, seed=seed)
        n_pow2 = 1 << max(int(n - 1).bit_length(), 0) if n > 1 else 1
        u = sob.random(n_pow2)[:n]
        return self.lo + u * (self.hi - self.lo)


@dataclass(frozen=True)
class CostConfig:
    lam: float = 10.0      # course-error weight
    e_max: float = 1.5     # soft barrier threshold [m]
    N_k: int = 184         # steps per episode
    eps: float = 1e-12     # flooring constant for the logarithms
    j_fail: float = 10.0   # cost assigned to crashed/diverged episodes

    def __post_init__(self):
        if self.lam <= 0 or self.e_max <= 0 or self.N_k < 2:
            raise ConfigError("need lam > 0, e_max > 0, N_k >= 2")


def episode_cost(e, dpsi, cfg: CostConfig, failed: bool = False) -> float:
    """Log-compressed tracking cost with soft barrier and increment terms.

    Works on the absolute lateral error.  The barrier is the log of the
    mean threshold excess, shifted so it is exactly zero when no step
    exceeds e_max (the raw log of an empty excess is undefined; the shift
    by -log(eps) keeps the term non-negative and monotone).  Failed
    episodes get the fixed penalty cost.
    """
    if failed:
        return cfg.j_fail
    e = np.abs(np.asarray(e, float))
    dpsi = np.abs(np.asarray(dpsi, float))
    if len(e) < 2 or len(e) != len(dpsi):
        raise ConfigError("need equal-length traces with at least 2 steps")
    main = float(np.mean(e + cfg.lam * dpsi))
    excess = np.maximum(e - cfg.e_max, 0.0)
    barrier_inner = max(float(np.mean(10.0 * excess)), cfg.eps)
    barrier = math.log(barrier_inner) - math.log(cfg.eps)
    increment = float(np.mean(np.diff(e)))
    bracket = max(main + barrier + increment, cfg.eps)
    return math.log(bracket)


def expected_improvement(model: GpModel, theta, best_cost: float) -> float:
    """Expected amount by which theta beats the incumbent (minimization)."""
    mu, var = gp_predict(model, theta)
    if var <= 0.0:
        return 0.0
    sigma = math.sqrt(var)
    z = (best_cost - mu) / sigma
    phi = INV_SQRT_2PI * math.exp(-0.5 * z * z)
    Phi = 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))
    return max((best_cost - mu) * Phi + sigma * phi, 0.0)


def _ei_batch(model: GpModel, thetas: np.ndarray, best_cost: float) -> np.ndarray:
    mu, var = gp_predict_batch(model, thetas)
    sigma = np.sqrt(var)
    out = np.zeros(len(thetas))
    pos = sigma > 0.0
    z = (best_cost - mu[pos]) / sigma[pos]
    out[pos] = (best_cost - mu[pos]) * ndtr(z) \
        + sigma[pos] * INV_SQRT_2PI * np.exp(-0.5 * z * z)
    return np.maximum(out, 0.0)


def acquire_next(model: GpModel, bounds: ThetaBounds, best_cost: float,
                 seed: int) -> np.ndarray:
    """Maximize EI: low-discrepancy candidates plus coordinate polish."""
    cands = bounds.sample(2048, seed)
    ei = _ei_batch(model, cands, best_cost)
    order = np.argsort(ei)[::-1][:8]
    best_theta = cands[order[0]].copy()
    best_ei = float(ei[order[0]])
    width = bounds.hi - bounds.lo
    for idx in order:
        theta = cands[idx].copy()
        half = width / 8.0
        for _ in range(3):  # shrinking coordinate sweeps
            for dim in range(bounds.dim):
                grid = np.linspace(max(theta[dim] - half[dim], bounds.lo[dim]),
                                   min(theta[dim] + half[dim], bounds.hi[dim]), 25)
                trial = np.repeat(theta[None, :], len(grid), axis=0)
                trial[:, dim] = grid
                vals = _ei_batch(model, trial, best_cost)
                j = int(np.argmax(vals))
                theta[dim] = grid[j]
            half *= 0.25
        val = float(_ei_batch(model, theta[None, :], best_cost)[0])
        if val > best_ei:
            best_ei = val
            best_theta = theta
    return best_theta


@dataclass
class BoResult:
    theta_star: np.ndarray
    best_cost: float
    thetas: np.ndarray       # (N, d) evaluation order
    costs: np.ndarray        # (N,)
    best_so_far: np.ndarray  # (N,)


def bo_loop(runner, bounds: ThetaBounds, m: int, N: int, seed: int,
            init_thetas=None, refit_every: int = 5,
            noise_var: float | None = None) -> BoResult:
    """Space-filling initialization followed by the EI acquisition cycle.

    runner maps a parameter vector to its observed episode cost.  Optional
    init_thetas are evaluated first and count toward the m initial points.
    Fully deterministic for a fixed (seed, configuration).
    """
    if m < 2 or N < m:
        raise ConfigError("need m >= 2 and N >= m")
    thetas: list[np.ndarray] = []
    costs: list[float] = []
    if init_thetas is not None:
        init_arr = np.atleast_2d(np.asarray(init_thetas, float))
        if len(init_arr) > m:
            raise ConfigError("more warm-start points than the initial budget")
        for t in init_arr:
            if not bounds.contains(t):
                raise ConfigError(f"initial point {t} outside bounds")
            thetas.append(t.copy())
            costs.append(float(runner(t)))
    n_fill = m - len(thetas)
    if n_fill > 0:
        for t in bounds.sample(n_fill, seed):
            thetas.append(t)
            costs.append(float(runner(t)))

    model = None
    hypers = None
    width = bounds.hi - bounds.lo
    n_fallback = 0
    for n in range(m, N):
        dataset = GpDataset(np.array(thetas), np.array(costs), noise_var=noise_var)
        refit = (n - m) % refit_every == 0
        model = gp_fit(dataset, bounds.lo, bounds.hi, seed=seed,
                       hypers=None if refit else hypers)
        hypers = (model.lengthscales, model.sigma_eta2, model.noise_var)
        best = float(np.min(costs))
        theta_next = acquire_next(model, bounds, best, seed=seed + 1000 + n)
        # a re-acquired or zero-information point adds nothing; alternate
        # between global space-filling and local perturbation of the
        # incumbent instead (both deterministic per seed)
        gaps = np.abs((np.array(thetas) - theta_next) / width).max(axis=1)
        ei_val = expected_improvement(model, theta_next, best)
        if float(gaps.min()) < 1e-4 or ei_val < 1e-12:
            if n_fallback % 2 == 0:
                theta_next = bounds.sample(1, seed=seed + 50000 + n)[0]
            else:
                incumbent = thetas[int(np.argmin(costs))]
                rng = np.random.default_rng(seed + 70000 + n)
                theta_next = np.clip(
                    incumbent + rng.standard_normal(bounds.dim) * width / 12.0,
                    bounds.lo, bounds.hi)
            n_fallback += 1
        thetas.append(theta_next)
        costs.append(float(runner(theta_next)))

    costs_arr = np.array(costs)
    best_idx = int(np.argmin(costs_arr))
    return BoResult(theta_star=thetas[best_idx].copy(),
                    best_cost=float(costs_arr[best_idx]),
                    thetas=np.array(thetas), costs=costs_arr,
                    best_so_far=np.minimum.accumulate(costs_arr))
