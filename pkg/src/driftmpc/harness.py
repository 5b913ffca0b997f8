"""Closed-loop episode runner, tuner entry point, and reporting.

The plant and the controller model are the same single-track dynamics with
independently supplied parameter sets; every other difference between them
is integrator substructure (the plant integrates the nonlinear model in
fine substeps, the controller predicts with the per-step linearization).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .bo import BoResult, CostConfig, ThetaBounds, bo_loop, episode_cost
from .equilibrium import solve_dep
from .errors import (ConfigError, DriftMpcError, GripBranchError,
                     NoConvergenceError, OffPathError)
from .mpc import MpcConfig, augment, linearize, solve_mpc
from .paths import (ClothoidSpec, PathTable, build_clothoid, build_eight_path,
                    errors_from_projection, project)
from .presets import (default_apt_params, default_clothoid, default_cost_config,
                      default_limits, default_mpc_config, default_theta_bounds,
                      default_vehicle_params)
from .tracking import AptParams, apt_radius, default_radius_grid, ppt_radius, steer_feedback
from .vehicle import (ControlInput, ControlLimits, Pose, VehicleParams,
                      static_loads, step, wrap_angle)

MODES = ("ppt", "apt", "dep", "almpc")
PLANT_SUBSTEPS = 10
E_FAIL = 10.0          # m, lateral blow-up threshold
V_MAX_SANE = 40.0      # m/s
DEP_FAIL_FRACTION = 0.2

TRACE_COLUMNS = ["t", "X", "Y", "phi", "V", "beta", "r", "delta_cmd",
                 "F_xr_cmd", "e", "d_phi", "d_psi", "e_la", "R_eq",
                 "delta_eq_hat", "V_eq", "beta_eq", "r_eq", "F_xr_eq",
                 "mpc_cost", "dep_converged"]


@dataclass(frozen=True)
class EightSpec:
    radius: float = 40.0  # lobe radius [m]


@dataclass(frozen=True)
class Scenario:
    path: ClothoidSpec | EightSpec = field(default_factory=default_clothoid)
    plant_params: VehicleParams = field(default_factory=default_vehicle_params)
    model_params: VehicleParams = field(default_factory=default_vehicle_params)
    limits: ControlLimits = field(default_factory=default_limits)
    mpc: MpcConfig = field(default_factory=default_mpc_config)
    apt: AptParams = field(default_factory=default_apt_params)
    cost: CostConfig = field(default_factory=default_cost_config)
    mode: str = "ppt"
    T: float = 18.4   # episode duration [s]
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        n = self.T / self.mpc.dT
        if abs(n - round(n)) > 1e-9 or round(n) < 2:
            raise ConfigError("T must be an integral multiple of dT (>= 2 steps)")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.mpc.dT))

    def build_path(self, spacing: float = 0.25) -> PathTable:
        if isinstance(self.path, EightSpec):
            return build_eight_path(self.path.radius, spacing)
        return build_clothoid(self.path, spacing)


@dataclass
class EpisodeTrace:
    columns: dict            # column name -> np.ndarray, TRACE_COLUMNS order
    failed: bool = False
    failure_reason: str = ""

    def __len__(self) -> int:
        return len(self.columns["t"])

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(TRACE_COLUMNS) + "\n")
            cols = [self.columns[c] for c in TRACE_COLUMNS]
            for i in range(len(self)):
                fh.write(",".join("%.12g" % col[i] for col in cols) + "\n")

    @staticmethod
    def from_csv(path) -> "EpisodeTrace":
        data = np.genfromtxt(path, delimiter=",", names=True)
        data = np.atleast_1d(data)
        cols = {name: np.asarray(data[name], float) for name in data.dtype.names}
        return EpisodeTrace(columns=cols)


@dataclass(frozen=True)
class MetricsReport:
    rmse_e: float
    rmse_dpsi: float
    rmse_V: float
    rmse_beta: float
    rmse_r: float
    rmse_delta: float
    rmse_F: float
    max_abs_e: float
    cost_J: float

    FIELDS = ("rmse_e", "rmse_dpsi", "rmse_V", "rmse_beta", "rmse_r",
              "rmse_delta", "rmse_F", "max_abs_e", "cost_J")


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(x)))) if len(x) else math.nan


def metrics_from_trace(trace: EpisodeTrace, cost_cfg: CostConfig) -> MetricsReport:
    """Tracking and drift-state RMSEs against the per-step planned states."""
    c = trace.columns
    J = episode_cost(c["e"], c["d_psi"], cost_cfg, failed=trace.failed) \
        if len(trace) >= 2 else cost_cfg.j_fail
    return MetricsReport(
        rmse_e=_rms(c["e"]),
        rmse_dpsi=_rms(c["d_psi"]),
        rmse_V=_rms(c["V"] - c["V_eq"]),
        rmse_beta=_rms(c["beta"] - c["beta_eq"]),
        rmse_r=_rms(c["r"] - c["r_eq"]),
        rmse_delta=_rms(c["delta_cmd"] - c["delta_eq_hat"]),
        rmse_F=_rms(c["F_xr_cmd"] - c["F_xr_eq"]),
        max_abs_e=float(np.max(np.abs(c["e"]))) if len(trace) else math.nan,
        cost_J=J,
    )


def _theta_for_mode(mode: str, theta, apt: AptParams) -> tuple[float, float, float]:
    """Resolve (delta_eq_base, w_r, w_e) from the mode and learned vector."""
    if theta is None:
        if mode != "ppt":
            raise ConfigError(f"mode '{mode}' requires a theta vector")
        return apt.delta_eq_base, apt.w_r, apt.w_e
    t = np.asarray(theta, float).ravel()
    if len(t) != 3:
        raise ConfigError("theta must have 3 components (delta_eq, w_r, w_e)")
    if mode == "ppt":
        return apt.delta_eq_base, apt.w_r, apt.w_e
    if mode == "apt":
        return apt.delta_eq_base, float(t[1]), float(t[2])
    if mode == "dep":
        return float(t[0]), apt.w_r, apt.w_e
    return float(t[0]), float(t[1]), float(t[2])  # almpc


def run_episode(scenario: Scenario, theta=None,
                path: PathTable | None = None) -> tuple[EpisodeTrace, MetricsReport]:
    """Run one closed-loop episode; returns the trace and its metrics.

    Per step: project the pose and form the tracking errors, pick the drift
    radius (adaptive law or predictive baseline, by mode), adjust the
    steering equilibrium, re-solve the drift equilibrium on the nominal
    model, relinearize, solve the constrained MPC, and apply the input to
    the plant.  Failures are classified and truncate the trace.
    """
    if path is None:
        path = scenario.build_path()
    mode = scenario.mode
    delta_base, w_r, w_e = _theta_for_mode(mode, theta, scenario.apt)
    apt = replace(scenario.apt, w_r=w_r, w_e=w_e)
    limits = scenario.limits
    mpc_cfg = scenario.mpc
    model_params = scenario.model_params
    plant_params = scenario.plant_params
    n_steps = scenario.n_steps
    _, F_zr_plant = static_loads(plant_params)
    plant_force_cap = plant_params.mu * F_zr_plant
    radius_grid = default_radius_grid()
    use_apt_law = mode in ("apt", "almpc")

    # initial condition: path origin, course aligned with the tangent, at the
    # stock equilibrium for the initial path radius
    if isinstance(scenario.path, EightSpec):
        x0, y0, theta0 = path.x[0], path.y[0], path.phi[0]
        R0 = scenario.path.radius
    else:
        x0, y0, theta0 = scenario.path.x0, scenario.path.y0, scenario.path.theta0
        R0 = 1.0 / scenario.path.kappa if scenario.path.kappa != 0 else 500.0
    eq0 = solve_dep(scenario.apt.delta_eq_base, R0, model_params)
    state = eq0.state()
    pose = Pose(float(x0), float(y0), wrap_angle(float(theta0) - eq0.beta_eq))
    u_prev = np.array([eq0.delta_eq, eq0.F_xr_eq])
    eq = eq0

    rows = {name: [] for name in TRACE_COLUMNS}
    failed = False
    reason = ""
    dep_failures = 0
    hint = None  # progress window for self-intersecting paths
    for k in range(n_steps):
        if not (0.1 <= state.V <= V_MAX_SANE):
            failed, reason = True, f"speed out of range at step {k}"
            break
        try:
            proj = project(pose, path, hint_index=hint)
        except OffPathError:
            failed, reason = True, f"projection lost at step {k}"
            break
        hint = proj.index
        errs = errors_from_projection(proj, pose, state.beta, apt.x_la)
        if abs(errs.e) > E_FAIL:
            failed, reason = True, f"lateral error blow-up at step {k}"
            break

        if use_apt_law:
            R_eq = apt_radius(errs, apt)
        else:
            stride = max(1, int(round(state.V * mpc_cfg.dT / path.spacing)))
            R_eq = ppt_radius(pose, path, mpc_cfg.N_p, radius_grid,
                              beta=state.beta, stride=stride, hint_index=hint)
        # mirror the base steering with the turn direction (drift switching)
        base_eff = delta_base if R_eq > 0 else -delta_base
        if use_apt_law:
            delta_hat = steer_feedback(errs, replace(apt, delta_eq_base=base_eff),
                                       limits.delta_min, limits.delta_max)
        else:
            delta_hat = min(max(base_eff, limits.delta_min), limits.delta_max)

        seed = (eq.V_eq, eq.beta_eq, eq.F_xr_eq)
        if eq.R_eq * R_eq < 0:  # lobe flip: mirror the warm start
            seed = (eq.V_eq, -eq.beta_eq, eq.F_xr_eq)
        dep_ok = True
        try:
            eq = solve_dep(delta_hat, R_eq, model_params, seed=seed)
        except (NoConvergenceError, GripBranchError, ConfigError):
            dep_ok = False  # hold the previous equilibrium
            dep_failures += 1
            if dep_failures > DEP_FAIL_FRACTION * n_steps:
                failed, reason = True, f"equilibrium failures exceed 20% at step {k}"
                break

        try:
            model = augment(linearize(eq, model_params, mpc_cfg.dT))
            xi_now = np.array([state.V, state.beta, state.r, u_prev[0], u_prev[1]])
            sol = solve_mpc(xi_now, eq, model, mpc_cfg, limits)
        except DriftMpcError as exc:
            failed, reason = True, f"controller failure at step {k}: {exc}"
            break
        # the plant's rear tire cannot exceed its own friction circle
        F_applied = min(sol.u_next.F_xr, plant_force_cap)
        u = ControlInput(sol.u_next.delta, F_applied)

        rows["t"].append(k * mpc_cfg.dT)
        rows["X"].append(pose.X)
        rows["Y"].append(pose.Y)
        rows["phi"].append(pose.phi)
        rows["V"].append(state.V)
        rows["beta"].append(state.beta)
        rows["r"].append(state.r)
        rows["delta_cmd"].append(u.delta)
        rows["F_xr_cmd"].append(u.F_xr)
        rows["e"].append(errs.e)
        rows["d_phi"].append(errs.d_phi)
        rows["d_psi"].append(errs.d_psi)
        rows["e_la"].append(errs.e_la)
        rows["R_eq"].append(R_eq)
        rows["delta_eq_hat"].append(eq.delta_eq)  # equals delta_hat unless holding
        rows["V_eq"].append(eq.V_eq)
        rows["beta_eq"].append(eq.beta_eq)
        rows["r_eq"].append(eq.r_eq)
        rows["F_xr_eq"].append(eq.F_xr_eq)
        rows["mpc_cost"].append(sol.cost)
        rows["dep_converged"].append(1.0 if dep_ok else 0.0)

        try:
            state, pose = step(state, pose, u, plant_params, mpc_cfg.dT,
                               substeps=PLANT_SUBSTEPS)
        except DriftMpcError as exc:
            failed, reason = True, f"plant left the valid regime at step {k}: {exc}"
            break
        u_prev = np.array([u.delta, u.F_xr])

    trace = EpisodeTrace(
        columns={name: np.array(vals) for name, vals in rows.items()},
        failed=failed, failure_reason=reason)
    return trace, metrics_from_trace(trace, scenario.cost)


# ---------------------------------------------------------------------------
# tuning

FREE_COMPONENTS = {"apt": [1, 2], "dep": [0], "almpc": [0, 1, 2]}


@dataclass
class TuneResult:
    theta_star: np.ndarray   # full 3-vector with pinned components filled in
    bo: BoResult
    mode: str
    history_thetas: np.ndarray  # (N, 3) full vectors in evaluation order

    def history_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("iteration,delta_eq,w_r,w_e,cost,best_so_far\n")
            for i in range(len(self.bo.costs)):
                t = self.history_thetas[i]
                fh.write("%d,%.12g,%.12g,%.12g,%.12g,%.12g\n" % (
                    i, t[0], t[1], t[2], self.bo.costs[i], self.bo.best_so_far[i]))


def tune(scenario: Scenario, init: int = 20, budget: int = 320,
         seed: int | None = None, bounds: ThetaBounds | None = None,
         extra_init=None) -> TuneResult:
    """Learn the free parameters of the scenario's mode with the BO loop.

    The mode fixes which components of (delta_eq, w_r, w_e) are free; the
    rest stay pinned at the scenario defaults.  The neutral default point
    is inserted into the initial design so tuning can never end worse than
    the untuned configuration; extra_init accepts further full 3-vectors
    to warm-start from (e.g. a previously tuned lower-dimensional mode).
    Deterministic per seed.
    """
    if scenario.mode not in FREE_COMPONENTS:
        raise ConfigError("tuning requires mode apt, dep, or almpc")
    if seed is None:
        seed = scenario.seed
    full_bounds = bounds if bounds is not None else default_theta_bounds()
    free = FREE_COMPONENTS[scenario.mode]
    sub_bounds = ThetaBounds(lo=full_bounds.lo[free], hi=full_bounds.hi[free])
    pinned = np.array([scenario.apt.delta_eq_base, 1.0, 0.0])
    path = scenario.build_path()

    def expand(theta_free: np.ndarray) -> np.ndarray:
        full = pinned.copy()
        full[free] = theta_free
        return full

    def runner(theta_free: np.ndarray) -> float:
        _, metrics = run_episode(scenario, expand(theta_free), path=path)
        return metrics.cost_J

    starts = [pinned[free]]
    if extra_init is not None:
        starts.extend(np.asarray(t, float)[free] for t in extra_init)
    # episodes are deterministic, so the surrogate gets a tiny fixed nugget;
    # a learned noise variance would absorb isolated good episodes
    # surrounded by failure-cost plateau as if they were measurement noise
    result = bo_loop(runner, sub_bounds, m=init, N=budget, seed=seed,
                     init_thetas=starts, noise_var=1e-6)
    history = np.array([expand(t) for t in result.thetas])
    return TuneResult(theta_star=expand(result.theta_star), bo=result,
                      mode=scenario.mode, history_thetas=history)


# ---------------------------------------------------------------------------
# reporting

def report(traces: list[EpisodeTrace], labels: list[str],
           cost_cfg: CostConfig | None = None,
           out_dir=None) -> tuple[str, list[MetricsReport]]:
    """Comparison table of the RMSE metrics, one row per labelled trace."""
    if len(traces) != len(labels):
        raise ConfigError("need one label per trace")
    if len({len(t) for t in traces}) > 1:
        raise ConfigError("traces have mismatched lengths")
    cfg = cost_cfg if cost_cfg is not None else default_cost_config()
    reports = [metrics_from_trace(t, cfg) for t in traces]
    header = ["label"] + list(MetricsReport.FIELDS)
    widths = [max(12, len(h) + 2) for h in header]
    lines = ["".join(h.ljust(w) for h, w in zip(header, widths))]
    for label, rep in zip(labels, reports):
        cells = [label] + ["%.6g" % getattr(rep, f) for f in MetricsReport.FIELDS]
        lines.append("".join(c.ljust(w) for c, w in zip(cells, widths)))
    table = "\n".join(lines)
    if out_dir is not None:
        import os
        os.makedirs(out_dir, exist_ok=True)
        for label, trace in zip(labels, traces):
            trace.to_csv(os.path.join(out_dir, f"trace_{label}.csv"))
        with open(os.path.join(out_dir, "metrics.csv"), "w") as fh:
            fh.write("label," + ",".join(MetricsReport.FIELDS) + "\n")
            for label, rep in zip(labels, reports):
                fh.write(label + "," + ",".join(
                    "%.12g" % getattr(rep, f) for f in MetricsReport.FIELDS) + "\n")
    return table, reports


# ---------------------------------------------------------------------------
# scenario (de)serialization

def scenario_to_dict(sc: Scenario) -> dict:
    if isinstance(sc.path, EightSpec):
        path = {"kind": "eight", "radius": sc.path.radius}
    else:
        p = sc.path
        path = {"kind": "clothoid", "x0": p.x0, "y0": p.y0, "theta0": p.theta0,
                "kappa": p.kappa, "kappa_prime": p.kappa_prime, "length": p.length}
    vp = lambda v: {"m": v.m, "I_z": v.I_z, "a": v.a, "b": v.b, "B": v.B,
                    "C": v.C, "mu": v.mu, "g": v.g}
    return {
        "path": path,
        "plant_params": vp(sc.plant_params),
        "model_params": vp(sc.model_params),
        "limits": {"delta_min": sc.limits.delta_min, "delta_max": sc.limits.delta_max,
                   "F_min": sc.limits.F_min, "F_max": sc.limits.F_max,
                   "d_delta_lim": sc.limits.d_delta_lim, "d_F_lim": sc.limits.d_F_lim},
        "mpc": {"N_p": sc.mpc.N_p, "N_c": sc.mpc.N_c, "Q": list(sc.mpc.Q),
                "R": list(sc.mpc.R), "dT": sc.mpc.dT},
        "apt": {"w_r": sc.apt.w_r, "w_e": sc.apt.w_e, "x_la": sc.apt.x_la,
                "k": sc.apt.k, "delta_eq_base": sc.apt.delta_eq_base},
        "cost": {"lam": sc.cost.lam, "e_max": sc.cost.e_max, "N_k": sc.cost.N_k,
                 "eps": sc.cost.eps, "j_fail": sc.cost.j_fail},
        "mode": sc.mode,
        "T": sc.T,
        "seed": sc.seed,
    }


def scenario_from_dict(data: dict) -> Scenario:
    try:
        pd = dict(data["path"])
        kind = pd.pop("kind")
        if kind == "eight":
            path = EightSpec(**pd)
        elif kind == "clothoid":
            path = ClothoidSpec(**pd)
        else:
            raise ConfigError(f"unknown path kind '{kind}'")
        return Scenario(
            path=path,
            plant_params=VehicleParams(**data["plant_params"]),
            model_params=VehicleParams(**data["model_params"]),
            limits=ControlLimits(**data["limits"]),
            mpc=MpcConfig(N_p=data["mpc"]["N_p"], N_c=data["mpc"]["N_c"],
                          Q=tuple(data["mpc"]["Q"]), R=tuple(data["mpc"]["R"]),
                          dT=data["mpc"]["dT"]),
            apt=AptParams(**data["apt"]),
            cost=CostConfig(**data["cost"]),
            mode=data["mode"],
            T=data["T"],
            seed=data.get("seed", 0),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed scenario: {exc}") from exc


def scenario_to_file(sc: Scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(sc), fh, indent=2)
        fh.write("\n")


def scenario_from_file(path) -> Scenario:
    with open(path) as fh:
        return scenario_from_dict(json.load(fh))


def case_scenario(case: int = 1, mode: str = "ppt", **overrides) -> Scenario:
    """Stock scenario for the exact-parameter (1) or mismatched (2) case."""
    if case == 1:
        plant = default_vehicle_params(mu=1.0)
    elif case == 2:
        plant = default_vehicle_params(mu=0.9)
    else:
        raise ConfigError("case must be 1 or 2")
    return Scenario(plant_params=plant,
                    model_params=default_vehicle_params(mu=1.0),
                    mode=mode, **overrides)
