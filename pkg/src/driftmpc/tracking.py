"""Per-step drift-radius and steering references.

Two radius laws are provided: the adaptive law driven by the look-ahead
error, and the predictive baseline that fits candidate circles to the
upcoming path.  The steering feedback shifts the equilibrium steering angle
proportionally to the look-ahead error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .paths import PathTable, TrackingErrors, project
from .vehicle import Pose

R_EQ_MIN = 5.0    # m
R_EQ_MAX = 500.0  # m


@dataclass(frozen=True)
class AptParams:
    w_r: float                    # radius weight [-]
    w_e: float                    # look-ahead error weight [-]
    x_la: float = 12.0            # look-ahead distance [m]
    k: float = -0.25              # steering feedback gain [rad/m]
    delta_eq_base: float = -0.52  # base steering equilibrium [rad]

    def __post_init__(self):
        if self.x_la <= 0:
            raise ConfigError("look-ahead distance must be positive")


def _clamp_radius(R: float, fallback_sign: float) -> float:
    if R > 0.0:
        sign = 1.0
    elif R < 0.0:
        sign = -1.0
    else:
        sign = fallback_sign if fallback_sign != 0.0 else 1.0
    return sign * min(max(abs(R), R_EQ_MIN), R_EQ_MAX)


def apt_radius(errors: TrackingErrors, p: AptParams) -> float:
    """Adaptive drift radius: weighted reference radius plus error term.

    The reference radius is capped before the law is applied so straight
    segments (infinite radius) stay finite; the result is clamped to
    [5, 500] m preserving its sign.
    """
    R_r = errors.R_r
    R_r = math.copysign(min(abs(R_r), R_EQ_MAX), R_r) if R_r != 0.0 else R_EQ_MAX
    R_eq = p.w_r * R_r + p.w_e * errors.e_la
    return _clamp_radius(R_eq, math.copysign(1.0, R_r))


def steer_feedback(errors: TrackingErrors, p: AptParams,
                   delta_min: float = -math.inf,
                   delta_max: float = math.inf) -> float:
    """Adjusted steering equilibrium: base plus look-ahead feedback."""
    delta_hat = p.delta_eq_base + p.k * errors.e_la
    return min(max(delta_hat, delta_min), delta_max)


def default_radius_grid(n: int = 40) -> np.ndarray:
    """Signed candidate radii, log-spaced magnitudes in [5, 500] m."""
    mags = np.geomspace(R_EQ_MIN, R_EQ_MAX, n)
    return np.concatenate([mags, -mags])


def ppt_radius(pose: Pose, path: PathTable, horizon_pts: int,
               radius_grid, beta: float = 0.0, stride: int = 1,
               hint_index: int | None = None) -> float:
    """Predictive baseline: best circle through the vehicle fitting the path.

    Each candidate circle is tangent to the vehicle's course at its current
    position.  The candidate minimizing the summed squared radial offsets
    to the next horizon_pts path samples (taken every `stride` samples, so
    the window can match the prediction horizon's travel) wins.
    """
    if horizon_pts < 3:
        raise ConfigError("need at least 3 fit points")
    proj = project(pose, path, hint_index=hint_index)
    course = pose.phi + beta
    sin_c, cos_c = math.sin(course), math.cos(course)
    idx = proj.index + stride * np.arange(1, horizon_pts + 1)
    idx = idx[idx < len(path)]
    if len(idx) < 3:
        idx = np.arange(proj.index + 1, len(path))
        if len(idx) < 3:
            idx = np.arange(max(len(path) - 4, 0) + 1, len(path))
    px = path.x[idx]
    py = path.y[idx]
    best_R = None
    best_cost = math.inf
    for R in np.asarray(radius_grid, dtype=float):
        cx = pose.X - R * sin_c
        cy = pose.Y + R * cos_c
        offsets = np.hypot(px - cx, py - cy) - abs(R)
        cost = float(offsets @ offsets)
        if cost < best_cost:
            best_cost = cost
            best_R = float(R)
    return _clamp_radius(best_R, math.copysign(1.0, proj.R_r))
