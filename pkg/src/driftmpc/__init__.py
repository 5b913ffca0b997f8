"""Drift-vehicle control: single-track drift dynamics, drift-equilibrium
solving, linearized MPC, adaptive path tracking, and a Bayesian-optimization
supervisor that learns the steering equilibrium and tracking-law weights
from closed-loop episode cost.
"""
from .bo import (BoResult, CostConfig, ThetaBounds, acquire_next, bo_loop,
                 episode_cost, expected_improvement)
from .equilibrium import DriftEquilibrium, dep_sweep, solve_dep
from .gp import GpDataset, GpModel, gp_fit, gp_predict, matern52
from .harness import (EightSpec, EpisodeTrace, MetricsReport, Scenario,
                      TuneResult, case_scenario, metrics_from_trace, report,
                      run_episode, scenario_from_file, scenario_to_file, tune)
from .mpc import (AugmentedModel, LinearModel, MpcConfig, MpcSolution, augment,
                  linearize, solve_mpc)
from .paths import (ClothoidSpec, PathTable, TrackingErrors, build_clothoid,
                    build_eight_path, project, tracking_errors)
from .qp import QpResult, solve_qp
from .tracking import AptParams, apt_radius, default_radius_grid, ppt_radius, steer_feedback
from .vehicle import (ControlInput, ControlLimits, Pose, VehicleParams,
                      VehicleState, dynamics, lateral_force, rear_lateral_force,
                      slip_angles, static_loads, step, wrap_angle)

__version__ = "0.1.0"
