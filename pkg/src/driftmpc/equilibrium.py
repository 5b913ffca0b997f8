"""Drift-equilibrium solver.

A drift equilibrium fixes the steering angle and the turn radius, then
zeroes all three state derivatives of the single-track model in the
unknowns (V, beta, F_xr), with the yaw rate eliminated through r = V / R.
The drift branch is the high-sideslip, counter-steered saddle; low-sideslip
(grip) solutions are rejected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (ConfigError, DegenerateSpeedError, FrictionCircleError,
                     GripBranchError, NoConvergenceError)
from .vehicle import ControlInput, VehicleParams, VehicleState, dynamics, static_loads

RESIDUAL_TOL = 1e-8
MAX_ITER = 100
DRIFT_BETA_MIN = 0.2  # rad, separates the drift saddle from grip solutions


@dataclass(frozen=True)
class DriftEquilibrium:
    V_eq: float      # [m/s]
    beta_eq: float   # [rad]
    r_eq: float      # [rad/s]
    delta_eq: float  # [rad]
    F_xr_eq: float   # [N]
    R_eq: float      # signed radius [m], R_eq = V_eq / r_eq

    def state(self) -> VehicleState:
        return VehicleState(self.V_eq, self.beta_eq, self.r_eq)

    def control(self) -> ControlInput:
        return ControlInput(self.delta_eq, self.F_xr_eq)

    def as_array(self) -> np.ndarray:
        """5-vector (V, beta, r, delta, F_xr)."""
        return np.array([self.V_eq, self.beta_eq, self.r_eq,
                         self.delta_eq, self.F_xr_eq])


def default_seed(R_eq: float, params: VehicleParams) -> tuple[float, float, float]:
    """Seed inside the drift basin for sedan-scale parameters."""
    _, F_zr = static_loads(params)
    return (10.0, -0.5 * math.copysign(1.0, R_eq), 0.5 * params.mu * F_zr)


def _residual(z: np.ndarray, delta_eq: float, R_eq: float,
              params: VehicleParams) -> np.ndarray | None:
    V, beta, F_xr = z
    try:
        dv = dynamics(VehicleState(V, beta, V / R_eq),
                      ControlInput(delta_eq, F_xr), params)
    except (FrictionCircleError, DegenerateSpeedError):
        return None
    return np.array(dv)


def _newton(seed, delta_eq: float, R_eq: float,
            params: VehicleParams) -> np.ndarray | None:
    """Damped Newton with forward-difference Jacobian; None if it fails."""
    _, F_zr = static_loads(params)
    f_cap = params.mu * F_zr * (1.0 - 1e-12)
    z = np.array(seed, dtype=float)
    z[0] = max(z[0], 0.5)
    z[2] = min(max(z[2], -f_cap), f_cap)
    res = _residual(z, delta_eq, R_eq, params)
    if res is None:
        return None
    for _ in range(MAX_ITER):
        norm0 = float(np.linalg.norm(res))
        if norm0 < RESIDUAL_TOL:
            return z
        jac = np.empty((3, 3))
        for j in range(3):
            h = 1e-6 * (1.0 + abs(z[j]))
            zp = z.copy()
            zp[j] += h
            res_p = _residual(zp, delta_eq, R_eq, params)
            if res_p is None:  # stepped outside the domain; try backward
                zp[j] -= 2.0 * h
                res_p = _residual(zp, delta_eq, R_eq, params)
                if res_p is None:
                    return None
                jac[:, j] = (res - res_p) / h
            else:
                jac[:, j] = (res_p - res) / h
        try:
            dz = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError:
            return None
        # backtracking line search with domain projection
        lam = 1.0
        accepted = False
        for _ in range(25):
            zt = z + lam * dz
            zt[0] = max(zt[0], 0.5)
            zt[2] = min(max(zt[2], -f_cap), f_cap)
            res_t = _residual(zt, delta_eq, R_eq, params)
            if res_t is not None and float(np.linalg.norm(res_t)) < norm0:
                z, res = zt, res_t
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            return None
    return None


def _is_drift_branch(beta: float, r: float) -> bool:
    return abs(beta) > DRIFT_BETA_MIN and beta * r < 0.0


def solve_dep(delta_eq: float, R_eq: float, params: VehicleParams,
              seed=None) -> DriftEquilibrium:
    """Solve for the drift equilibrium at a fixed steering angle and radius.

    seed may be a single (V, beta, F_xr) guess or a sequence of guesses;
    the default seed (and a couple of variations) are always appended as
    fallbacks.  Raises NoConvergenceError if no seed converges and
    GripBranchError if every converged solution is on the grip branch.
    """
    if not 5.0 <= abs(R_eq) <= 500.0:
        raise ConfigError(f"|R_eq|={abs(R_eq):.2f} m outside [5, 500] m")
    seeds = []
    if seed is not None:
        first = seed[0] if isinstance(seed, (list, tuple)) and \
            isinstance(seed[0], (list, tuple, np.ndarray)) else None
        if first is not None:
            seeds.extend(tuple(s) for s in seed)
        else:
            seeds.append(tuple(seed))
    base = default_seed(R_eq, params)
    seeds.append(base)
    seeds.append((base[0] * 1.6, base[1] * 1.4, base[2]))
    seeds.append((base[0] * 0.6, base[1] * 0.7, base[2] * 1.3))
    converged_grip = False
    for s in seeds:
        z = _newton(s, delta_eq, R_eq, params)
        if z is None:
            continue
        V, beta, F_xr = float(z[0]), float(z[1]), float(z[2])
        r = V / R_eq
        if not _is_drift_branch(beta, r):
            converged_grip = True
            continue
        return DriftEquilibrium(V_eq=V, beta_eq=beta, r_eq=r,
                                delta_eq=delta_eq, F_xr_eq=F_xr, R_eq=R_eq)
    if converged_grip:
        raise GripBranchError(
            f"only low-sideslip solutions found at delta={delta_eq:.3f}, R={R_eq:.1f}")
    raise NoConvergenceError(
        f"no equilibrium found at delta={delta_eq:.3f}, R={R_eq:.1f}")


@dataclass(frozen=True)
class SweepCell:
    delta_eq: float
    R_eq: float
    eq: DriftEquilibrium | None
    converged: bool
    message: str


def dep_sweep(delta_grid, R_grid, params: VehicleParams) -> list[SweepCell]:
    """Solve a grid of (delta, R) pairs with warm-started continuation.

    Walks each steering column through the radius grid, seeding every solve
    from its converged neighbour.  Failures are recorded per cell.
    """
    if len(delta_grid) == 0 or len(R_grid) == 0:
        raise ConfigError("sweep grids must be non-empty")
    cells: list[SweepCell] = []
    col_seed = None
    for delta in delta_grid:
        warm = col_seed
        col_first = None
        for R in R_grid:
            seeds = [warm] if warm is not None else None
            try:
                eq = solve_dep(float(delta), float(R), params, seed=seeds)
                cells.append(SweepCell(float(delta), float(R), eq, True, "ok"))
                warm = (eq.V_eq, eq.beta_eq, eq.F_xr_eq)
                if col_first is None:
                    col_first = warm
            except (NoConvergenceError, GripBranchError, ConfigError) as exc:
                cells.append(SweepCell(float(delta), float(R), None, False,
                                       type(exc).__name__))
        col_seed = col_first
    return cells


def sweep_to_csv(cells: list[SweepCell], path) -> None:
    with open(path, "w") as fh:
        fh.write("delta,R,V,beta,r,Fxr,converged\n")
        for c in cells:
            if c.converged and c.eq is not None:
                fh.write("%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,1\n" % (
                    c.delta_eq, c.R_eq, c.eq.V_eq, c.eq.beta_eq,
                    c.eq.r_eq, c.eq.F_xr_eq))
            else:
                fh.write("%.12g,%.12g,nan,nan,nan,nan,0\n" % (c.delta_eq, c.R_eq))
