"""Robust multi-antenna UAV downlink: beamforming and 2-D hover positioning via SDP."""
from .geometry import SystemParams, steering_vector, taylor_terms, channel_vector, sinr, aod_from_geometry
from .uncertainty import AoDUncertainty, LocationUncertainty, Scenario, TrueRealization, worst_case_sinr_oracle
from .conic import ProblemOptions, assemble, solve, kkt_diagnostics, dump_problem
from .baselines import solve_fixed_direction, solve_nonrobust
from .experiments import ExperimentConfig, SweepPoint, generate_scenario, run_point, aggregate

__version__ = "0.1.0"
