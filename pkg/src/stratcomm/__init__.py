"""Optimal encoder distortion for strategic communication with decoder side information."""

__version__ = "0.1.0"

from .best_reply import average_distortion, belief_thresholds, best_reply, robust_distortion
from .dsbs import dsbs_solve, h_inverse, solve_q_star, three_posterior_optimize
from .info import channel_capacity, entropy, kl_divergence, mutual_information
from .problem import DsbsParams, ProblemSpec, dsbs_to_problem, load_problem
from .splitting import lagrangian_value, solve_splitting, strategy_from_splitting, zero_capacity_value

__all__ = [
    "DsbsParams", "ProblemSpec", "average_distortion", "belief_thresholds", "best_reply", "channel_capacity",
    "dsbs_solve", "dsbs_to_problem", "entropy", "h_inverse", "kl_divergence", "lagrangian_value", "load_problem",
    "mutual_information", "robust_distortion", "solve_q_star", "solve_splitting", "strategy_from_splitting",
    "three_posterior_optimize", "zero_capacity_value",
]
