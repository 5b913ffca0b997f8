"""Single-track drift vehicle: parameters, tire forces, dynamics, integration.

The same model runs both as the controller's nominal model and as the
simulation plant; the two differ only through the parameter values they are
given (e.g. the road friction coefficient).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, DegenerateSpeedError, FrictionCircleError

V_FLOOR = 0.1  # m/s, sideslip is ill-defined below this


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.fmod(angle + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass(frozen=True)
class VehicleParams:
    m: float       # mass [kg]
    I_z: float     # yaw inertia [kg m^2]
    a: float       # CoG to front axle [m]
    b: float       # CoG to rear axle [m]
    B: float       # tire stiffness factor [-]
    C: float       # tire shape factor [-]
    mu: float      # road friction coefficient [-]
    g: float = 9.81  # gravitational acceleration [m/s^2]

    def __post_init__(self):
        if min(self.m, self.I_z, self.a, self.b, self.B, self.C) <= 0:
            raise ConfigError("m, I_z, a, b, B, C must all be positive")
        if not 0.0 < self.mu <= 2.0:
            raise ConfigError(f"friction coefficient out of range: {self.mu}")


@dataclass(frozen=True)
class VehicleState:
    V: float     # absolute velocity at CoG [m/s]
    beta: float  # sideslip angle [rad]
    r: float     # yaw rate [rad/s]


@dataclass(frozen=True)
class ControlInput:
    delta: float  # front steering angle [rad]
    F_xr: float   # rear longitudinal tire force [N]


@dataclass(frozen=True)
class ControlLimits:
    delta_min: float    # [rad]
    delta_max: float    # [rad]
    F_min: float        # [N]
    F_max: float        # [N]
    d_delta_lim: float  # per-step steering change bound [rad]
    d_F_lim: float      # per-step force change bound [N]

    def __post_init__(self):
        if self.delta_min >= self.delta_max or self.F_min >= self.F_max:
            raise ConfigError("lower input bounds must be below upper bounds")
        if self.d_delta_lim <= 0 or self.d_F_lim <= 0:
            raise ConfigError("rate bounds must be positive")


@dataclass(frozen=True)
class Pose:
    X: float    # global x position [m]
    Y: float    # global y position [m]
    phi: float  # heading angle, wrapped to (-pi, pi] [rad]


def static_loads(params: VehicleParams) -> tuple[float, float]:
    """Static front/rear vertical loads (F_zf, F_zr) in N.

    Static distribution only; there is no longitudinal weight transfer in
    this model.
    """
    wheelbase = params.a + params.b
    F_zf = params.m * params.g * params.b / wheelbase
    F_zr = params.m * params.g * params.a / wheelbase
    return F_zf, F_zr


def slip_angles(state: VehicleState, delta: float,
                params: VehicleParams) -> tuple[float, float]:
    """Front and rear tire sideslip angles (alpha_f, alpha_r) in rad.

    Uses the two-argument arctangent so large sideslip (|beta| near pi/2)
    is handled.
    """
    if state.V <= V_FLOOR:
        raise DegenerateSpeedError(f"V={state.V:.3f} m/s is below {V_FLOOR} m/s")
    vx = state.V * math.cos(state.beta)
    vy = state.V * math.sin(state.beta)
    alpha_f = math.atan2(vy + params.a * state.r, vx) - delta
    alpha_r = math.atan2(vy - params.b * state.r, vx)
    return alpha_f, alpha_r


def lateral_force(alpha: float, F_z: float, params: VehicleParams) -> float:
    """Lateral tire force from the simplified Pacejka model [N]."""
    return -params.mu * F_z * math.sin(params.C * math.atan(params.B * alpha))


def rear_lateral_force(F_xr: float, F_zr: float, params: VehicleParams,
                       alpha_r: float) -> float:
    """Rear lateral force from the friction circle [N].

    The rear tire is saturated, so the available lateral force is the
    friction-circle remainder after the longitudinal component.  The sign
    opposes the rear slip angle, matching the front tire's convention.
    """
    cap = params.mu * F_zr
    if abs(F_xr) > cap * (1.0 + 1e-12):
        raise FrictionCircleError(
            f"|F_xr|={abs(F_xr):.1f} N exceeds mu*F_zr={cap:.1f} N")
    magnitude = math.sqrt(max(cap * cap - F_xr * F_xr, 0.0))
    if alpha_r > 0.0:
        return -magnitude
    if alpha_r < 0.0:
        return magnitude
    return 0.0


def dynamics(state: VehicleState, control: ControlInput,
             params: VehicleParams) -> tuple[float, float, float]:
    """Continuous-time state derivatives (dV, dbeta, dr)."""
    alpha_f, alpha_r = slip_angles(state, control.delta, params)
    F_zf, F_zr = static_loads(params)
    F_yf = lateral_force(alpha_f, F_zf, params)
    F_yr = rear_lateral_force(control.F_xr, F_zr, params, alpha_r)
    delta, beta = control.delta, state.beta
    sin_b, cos_b = math.sin(beta), math.cos(beta)
    sin_db = math.sin(delta - beta)
    cos_db = math.cos(delta - beta)
    dV = (-F_yf * sin_db + F_yr * sin_b + control.F_xr * cos_b) / params.m
    dbeta = ((F_yf * cos_db + F_yr * cos_b - control.F_xr * sin_b)
             / (params.m * state.V)) - state.r
    dr = (params.a * F_yf * math.cos(delta) - params.b * F_yr) / params.I_z
    return dV, dbeta, dr


def _deriv6(z: tuple, control: ControlInput, params: VehicleParams) -> tuple:
    V, beta, r, _, _, phi = z
    dV, dbeta, dr = dynamics(VehicleState(V, beta, r), control, params)
    course = phi + beta
    return (dV, dbeta, dr, V * math.cos(course), V * math.sin(course), r)


def step(state: VehicleState, pose: Pose, control: ControlInput,
         params: VehicleParams, dt: float,
         substeps: int = 1) -> tuple[VehicleState, Pose]:
    """Advance state and pose by dt using classical RK4.

    The pose propagates kinematically along the course direction phi + beta.
    With substeps > 1 the interval is subdivided, holding the control fixed.
    """
    if dt <= 0:
        raise ConfigError("dt must be positive")
    h = dt / substeps
    z = (state.V, state.beta, state.r, pose.X, pose.Y, pose.phi)
    for _ in range(substeps):
        k1 = _deriv6(z, control, params)
        z2 = tuple(z[i] + 0.5 * h * k1[i] for i in range(6))
        k2 = _deriv6(z2, control, params)
        z3 = tuple(z[i] + 0.5 * h * k2[i] for i in range(6))
        k3 = _deriv6(z3, control, params)
        z4 = tuple(z[i] + h * k3[i] for i in range(6))
        k4 = _deriv6(z4, control, params)
        z = tuple(z[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i])
                  for i in range(6))
    return (VehicleState(z[0], z[1], z[2]),
            Pose(z[3], z[4], wrap_angle(z[5])))
