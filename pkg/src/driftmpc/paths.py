"""Reference-path geometry: clothoid and figure-eight tables, projection,
and the tracking-error quantities fed to the radius/steering laws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, OffPathError
from .vehicle import Pose, wrap_angle

OFF_PATH_DISTANCE = 50.0  # m, projection guard


@dataclass(frozen=True)
class ClothoidSpec:
    x0: float = 0.0          # start x [m]
    y0: float = 0.0          # start y [m]
    theta0: float = 0.0      # initial tangent angle [rad]
    kappa: float = 0.025     # initial curvature [1/m]
    kappa_prime: float = 1.0 / 12000.0  # curvature rate [1/m^2]
    length: float = 360.0    # total arc length [m]

    def __post_init__(self):
        if self.length <= 0:
            raise ConfigError("clothoid length must be positive")


@dataclass(frozen=True)
class PathTable:
    """Uniformly sampled path: arc length, position, tangent, curvature."""
    s: np.ndarray       # arc length [m], strictly increasing, uniform
    x: np.ndarray       # [m]
    y: np.ndarray       # [m]
    phi: np.ndarray     # tangent angle [rad], NOT wrapped (monotone-ish)
    kappa: np.ndarray   # curvature [1/m]
    spacing: float      # sample interval [m]

    def __len__(self) -> int:
        return len(self.s)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("s,X,Y,phi_r,kappa\n")
            for i in range(len(self.s)):
                fh.write("%.12g,%.12g,%.12g,%.12g,%.12g\n" % (
                    self.s[i], self.x[i], self.y[i], self.phi[i], self.kappa[i]))


@dataclass(frozen=True)
class TrackingErrors:
    e: float      # signed lateral error, positive left of tangent [m]
    d_phi: float  # heading error [rad]
    d_psi: float  # course error = d_phi + beta [rad]
    e_la: float   # look-ahead error [m]
    R_r: float    # local reference radius 1/kappa, sign preserved [m]


def _tangent_angle(spec: ClothoidSpec, s: np.ndarray) -> np.ndarray:
    return spec.theta0 + spec.kappa * s + 0.5 * spec.kappa_prime * s * s


def build_clothoid(spec: ClothoidSpec, spacing: float = 0.25) -> PathTable:
    """Sample a clothoid by integrating cos/sin of its tangent angle.

    Each sample interval is integrated with composite Simpson on four
    panels, which keeps position error far below the projection refinement
    scale for sub-meter spacing.
    """
    if spacing <= 0 or spacing > spec.length:
        raise ConfigError("spacing must be in (0, length]")
    n = int(round(spec.length / spacing)) + 1
    s = np.arange(n) * spacing
    x = np.empty(n)
    y = np.empty(n)
    x[0], y[0] = spec.x0, spec.y0
    # Simpson weights for 4 panels per interval
    offsets = np.linspace(0.0, spacing, 5)
    weights = np.array([1.0, 4.0, 2.0, 4.0, 1.0]) * (spacing / 4.0) / 3.0
    for i in range(1, n):
        ss = s[i - 1] + offsets
        psi = _tangent_angle(spec, ss)
        x[i] = x[i - 1] + float(weights @ np.cos(psi))
        y[i] = y[i - 1] + float(weights @ np.sin(psi))
    phi = _tangent_angle(spec, s)
    kappa = spec.kappa + spec.kappa_prime * s
    return PathTable(s=s, x=x, y=y, phi=phi, kappa=kappa, spacing=spacing)


def build_eight_path(radius: float, spacing: float = 0.25) -> PathTable:
    """Figure-eight: two tangent circles of opposite curvature.

    Starts at the crossing point heading +x, runs the left (positive
    curvature) lobe as a full circle, then the right lobe.  Total length
    is 4*pi*radius and the curvature column is +-1/radius.
    """
    if radius <= 0:
        raise ConfigError("radius must be positive")
    lobe_len = 2.0 * math.pi * radius
    n_lobe = int(round(lobe_len / spacing))
    total = 2 * n_lobe + 1
    s = np.arange(total) * spacing
    x = np.empty(total)
    y = np.empty(total)
    phi = np.empty(total)
    kappa = np.empty(total)
    # left lobe: center (0, +R); angle from center starts at -pi/2
    s1 = s[:n_lobe]
    ang = -0.5 * math.pi + s1 / radius
    x[:n_lobe] = radius * np.cos(ang)
    y[:n_lobe] = radius + radius * np.sin(ang)
    phi[:n_lobe] = s1 / radius
    kappa[:n_lobe] = 1.0 / radius
    # right lobe: center (0, -R); angle starts at +pi/2, clockwise
    s2 = s[n_lobe:] - lobe_len
    ang = 0.5 * math.pi - s2 / radius
    x[n_lobe:] = radius * np.cos(ang)
    y[n_lobe:] = -radius + radius * np.sin(ang)
    phi[n_lobe:] = -s2 / radius
    kappa[n_lobe:] = -1.0 / radius
    return PathTable(s=s, x=x, y=y, phi=phi, kappa=kappa, spacing=spacing)


@dataclass(frozen=True)
class Projection:
    index: int    # nearest sample index
    e: float      # signed lateral error [m]
    phi_r: float  # reference tangent angle at the foot point [rad]
    R_r: float    # signed reference radius [m]
    kappa: float  # curvature at the foot point [1/m]


def project(pose: Pose, path: PathTable, hint_index: int | None = None,
            window_back: int = 40, window_fwd: int = 600) -> Projection:
    """Project a pose onto the path: nearest sample plus quadratic refinement.

    The lateral error is signed positive when the pose lies left of the
    local path tangent.  With hint_index the search is restricted to a
    window around the previous foot point, which keeps progress monotone on
    self-intersecting paths (the figure-eight crossing is ambiguous to a
    purely global nearest-point search).
    """
    dx = path.x - pose.X
    dy = path.y - pose.Y
    d2 = dx * dx + dy * dy
    if hint_index is not None:
        lo = max(hint_index - window_back, 0)
        hi = min(hint_index + window_fwd, len(path) - 1)
        i = lo + int(np.argmin(d2[lo:hi + 1]))
    else:
        i = int(np.argmin(d2))
    dist = math.sqrt(float(d2[i]))
    if dist > OFF_PATH_DISTANCE:
        raise OffPathError(f"pose is {dist:.1f} m from the nearest sample")
    # quadratic fit through the three neighbouring squared distances
    t = 0.0
    if 0 < i < len(path) - 1:
        y0, y1, y2 = float(d2[i - 1]), float(d2[i]), float(d2[i + 1])
        denom = y0 - 2.0 * y1 + y2
        if abs(denom) > 1e-18:
            t = max(-1.0, min(1.0, 0.5 * (y0 - y2) / denom))
    if t >= 0.0:
        j, w = i, t
    else:
        j, w = i - 1, 1.0 + t
    if j >= len(path) - 1:
        j, w = len(path) - 2, 1.0
    if j < 0:
        j, w = 0, 0.0
    rx = path.x[j] * (1.0 - w) + path.x[j + 1] * w
    ry = path.y[j] * (1.0 - w) + path.y[j + 1] * w
    rphi = path.phi[j] + wrap_angle(path.phi[j + 1] - path.phi[j]) * w
    rkap = path.kappa[j] * (1.0 - w) + path.kappa[j + 1] * w
    e = -(pose.X - rx) * math.sin(rphi) + (pose.Y - ry) * math.cos(rphi)
    if rkap != 0.0:
        R_r = 1.0 / rkap
    else:
        R_r = math.inf
    return Projection(index=i, e=float(e), phi_r=float(wrap_angle(rphi)),
                      R_r=float(R_r), kappa=float(rkap))


def errors_from_projection(proj: Projection, pose: Pose, beta: float,
                           x_la: float) -> TrackingErrors:
    d_phi = wrap_angle(pose.phi - proj.phi_r)
    d_psi = d_phi + beta
    e_la = proj.e + x_la * math.sin(d_psi)
    return TrackingErrors(e=proj.e, d_phi=d_phi, d_psi=d_psi, e_la=e_la,
                          R_r=proj.R_r)


def tracking_errors(pose: Pose, beta: float, path: PathTable, x_la: float,
                    hint_index: int | None = None) -> TrackingErrors:
    """Lateral, heading, course and look-ahead errors at the current pose."""
    proj = project(pose, path, hint_index=hint_index)
    return errors_from_projection(proj, pose, beta, x_la)
