import math

import numpy as np
import pytest

from driftmpc.errors import ConfigError, DegenerateSpeedError, FrictionCircleError
from driftmpc.vehicle import (ControlInput, Pose, VehicleParams, VehicleState,
                              dynamics, lateral_force, rear_lateral_force,
                              slip_angles, static_loads, step, wrap_angle)


def test_wrap_angle_range():
    for a in [-7.0, -math.pi, 0.0, math.pi, 3 * math.pi / 2, 10.0]:
        w = wrap_angle(a)
        assert -math.pi < w <= math.pi
        assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-12)
        assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-12)


def test_params_validation():
    with pytest.raises(ConfigError):
        VehicleParams(m=-1, I_z=1, a=1, b=1, B=1, C=1, mu=1)
    with pytest.raises(ConfigError):
        VehicleParams(m=1, I_z=1, a=1, b=1, B=1, C=1, mu=2.5)


class TestSlipAngles:
    def test_straight_symmetric(self, params):
        af, ar = slip_angles(VehicleState(10.0, 0.0, 0.0), 0.0, params)
        assert af == 0.0 and ar == 0.0

    def test_steering_only_shifts_front(self, params):
        af, ar = slip_angles(VehicleState(10.0, 0.0, 0.0), 0.1, params)
        assert math.isclose(af, -0.1, abs_tol=1e-15)
        assert ar == 0.0

    def test_drift_state_matches_formula_oracle(self, params):
        # frozen from a direct scalar evaluation of the slip-angle formulas
        af, ar = slip_angles(VehicleState(8.0, -0.6, 1.2), -0.3, params)
        assert math.isclose(af, -0.105840507898057, abs_tol=1e-12)
        assert math.isclose(ar, -0.777341349604249, abs_tol=1e-12)

    def test_degenerate_speed_raises(self, params):
        with pytest.raises(DegenerateSpeedError):
            slip_angles(VehicleState(0.05, 0.0, 0.0), 0.0, params)


class TestLateralForce:
    def test_zero_slip(self, params):
        assert lateral_force(0.0, 9000.0, params) == 0.0

    def test_saturation_limit(self, params):
        limit = -params.mu * 9000.0 * math.sin(params.C * math.pi / 2)
        assert math.isclose(lateral_force(1e9, 9000.0, params), limit, rel_tol=1e-6)

    def test_formula_oracle(self, params):
        # frozen: -1.0 * 9000 * sin(1.626 * atan(8.321 * 0.1))
        assert math.isclose(lateral_force(0.1, 9000.0, params),
                            -8133.787336593601, abs_tol=1e-9)

    def test_bounded_and_odd(self, params, rng):
        for _ in range(200):
            alpha = rng.uniform(-3, 3)
            F_z = rng.uniform(100, 20000)
            f = lateral_force(alpha, F_z, params)
            assert abs(f) <= params.mu * F_z + 1e-9
            assert math.isclose(f, -lateral_force(-alpha, F_z, params), abs_tol=1e-9)


class TestRearLateralForce:
    def test_fully_longitudinal(self, params):
        cap = params.mu * 8000.0
        assert rear_lateral_force(cap, 8000.0, params, -0.5) == 0.0

    def test_fully_lateral(self, params):
        f = rear_lateral_force(0.0, 8000.0, params, -0.5)
        assert math.isclose(abs(f), params.mu * 8000.0, rel_tol=1e-12)

    def test_magnitude_oracle(self):
        p = VehicleParams(m=1830.0, I_z=3234.0, a=1.40, b=1.65,
                          B=8.321, C=1.626, mu=0.9)
        f = rear_lateral_force(4000.0, 8500.0, p, -0.3)
        assert math.isclose(abs(f), 6520.927848090331, abs_tol=1e-8)

    def test_sign_opposes_rear_slip(self, params):
        assert rear_lateral_force(1000.0, 8000.0, params, 0.4) < 0
        assert rear_lateral_force(1000.0, 8000.0, params, -0.4) > 0

    def test_violation_raises(self, params):
        with pytest.raises(FrictionCircleError):
            rear_lateral_force(9000.0, 8000.0, params, -0.5)

    def test_friction_circle_identity(self, params, rng):
        F_zr = 8240.4
        cap = params.mu * F_zr
        for _ in range(100):
            F_xr = rng.uniform(-cap, cap)
            f = rear_lateral_force(F_xr, F_zr, params, -0.4)
            assert math.isclose(F_xr**2 + f**2, cap**2, rel_tol=1e-12)


class TestStaticLoads:
    def test_stock_values(self, params):
        F_zf, F_zr = static_loads(params)
        assert math.isclose(F_zf, 1830.0 * 9.81 * 1.65 / 3.05, rel_tol=1e-12)
        assert math.isclose(F_zr, 1830.0 * 9.81 * 1.40 / 3.05, rel_tol=1e-12)
        assert math.isclose(F_zf, 9711.9, abs_tol=0.05)
        assert math.isclose(F_zr, 8240.4, abs_tol=0.05)

    def test_sum_is_weight(self, params):
        F_zf, F_zr = static_loads(params)
        assert math.isclose(F_zf + F_zr, params.m * params.g, rel_tol=1e-14)

    def test_symmetric_wheelbase(self):
        p = VehicleParams(m=1000.0, I_z=2000.0, a=1.5, b=1.5, B=8.0, C=1.6, mu=1.0)
        F_zf, F_zr = static_loads(p)
        assert math.isclose(F_zf, F_zr, rel_tol=1e-14)
        assert math.isclose(F_zf, 0.5 * p.m * p.g, rel_tol=1e-14)


class TestDynamics:
    def test_coasting_straight_is_stationary(self, params):
        dV, dbeta, dr = dynamics(VehicleState(10.0, 0.0, 0.0),
                                 ControlInput(0.0, 0.0), params)
        assert dV == 0.0 and dbeta == 0.0 and dr == 0.0

    def test_mass_scaling_structure(self, params):
        # doubling m while halving g keeps every tire force identical, so
        # the translational accelerations must halve and the yaw one stay
        state = VehicleState(12.0, -0.5, 0.4)
        u = ControlInput(-0.3, 3000.0)
        heavy = VehicleParams(m=2 * params.m, I_z=params.I_z, a=params.a,
                              b=params.b, B=params.B, C=params.C,
                              mu=params.mu, g=params.g / 2)
        dV1, db1, dr1 = dynamics(state, u, params)
        dV2, db2, dr2 = dynamics(state, u, heavy)
        assert math.isclose(dV2, dV1 / 2, rel_tol=1e-12)
        assert math.isclose(db2 + state.r, (db1 + state.r) / 2, rel_tol=1e-12)
        assert math.isclose(dr2, dr1, rel_tol=1e-12)


class TestStep:
    def test_straight_coasting_advances_x(self, params):
        s, p = step(VehicleState(10.0, 0.0, 0.0), Pose(0.0, 0.0, 0.0),
                    ControlInput(0.0, 0.0), params, 0.5)
        assert math.isclose(p.X, 5.0, rel_tol=1e-12)
        assert p.Y == 0.0
        assert s.V == 10.0

    def test_small_dt_limit(self, params):
        s0 = VehicleState(12.0, -0.4, 0.5)
        p0 = Pose(1.0, 2.0, 0.3)
        s, p = step(s0, p0, ControlInput(-0.3, 4000.0), params, 1e-8)
        assert math.isclose(s.V, s0.V, abs_tol=1e-6)
        assert math.isclose(s.beta, s0.beta, abs_tol=1e-8)
        assert math.isclose(p.X, p0.X, abs_tol=1e-6)

    def test_rk4_order(self, params):
        # halving dt must shrink the one-step error by at least 2^3 against
        # a much finer reference on a smooth segment
        s0 = VehicleState(15.0, -0.5, 0.45)
        p0 = Pose(0.0, 0.0, 0.2)
        u = ControlInput(-0.45, 5000.0)

        def error(dt, substeps):
            s, p = step(s0, p0, u, params, dt, substeps)
            s_ref, p_ref = step(s0, p0, u, params, dt, substeps * 100)
            a = np.array([s.V, s.beta, s.r, p.X, p.Y, p.phi])
            b = np.array([s_ref.V, s_ref.beta, s_ref.r, p_ref.X, p_ref.Y, p_ref.phi])
            return np.linalg.norm(a - b)

        e1 = error(0.2, 1)
        e2 = error(0.1, 1)
        assert e1 / e2 >= 8.0

    def test_substep_equivalence(self, params):
        s0 = VehicleState(15.0, -0.5, 0.45)
        p0 = Pose(0.0, 0.0, 0.2)
        u = ControlInput(-0.45, 5000.0)
        s_a, p_a = step(s0, p0, u, params, 0.1, substeps=10)
        s_b, p_b = step(s0, p0, u, params, 0.01, substeps=1)
        for _ in range(9):
            s_b, p_b = step(s_b, p_b, u, params, 0.01, substeps=1)
        assert math.isclose(s_a.V, s_b.V, rel_tol=1e-12)
        assert math.isclose(p_a.X, p_b.X, rel_tol=1e-12)

    def test_plant_model_bit_identity(self):
        # mismatch lives only in parameter values: identical params and
        # inputs give bit-identical trajectories
        p1 = VehicleParams(m=1830.0, I_z=3234.0, a=1.40, b=1.65,
                           B=8.321, C=1.626, mu=0.9)
        p2 = VehicleParams(m=1830.0, I_z=3234.0, a=1.40, b=1.65,
                           B=8.321, C=1.626, mu=0.9)
        s0 = VehicleState(14.0, -0.6, 0.5)
        pose0 = Pose(0.0, 0.0, 0.0)
        u = ControlInput(-0.5, 5000.0)
        sa, pa = step(s0, pose0, u, p1, 0.1, substeps=10)
        sb, pb = step(s0, pose0, u, p2, 0.1, substeps=10)
        assert (sa.V, sa.beta, sa.r) == (sb.V, sb.beta, sb.r)
        assert (pa.X, pa.Y, pa.phi) == (pb.X, pb.Y, pb.phi)

    def test_invalid_dt(self, params):
        with pytest.raises(ConfigError):
            step(VehicleState(10, 0, 0), Pose(0, 0, 0),
                 ControlInput(0, 0), params, 0.0)
