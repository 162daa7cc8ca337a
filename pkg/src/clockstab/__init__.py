"""Stability limits of Ramsey optical clocks with noisy lasers.

Analytic instability budget (projection noise, Dick effect, coherence-time
limit), Monte-Carlo servo-loop simulation with synthetic laser noise,
fringe-hop onset from mean first passage times, and the derived optimal
operating points.
"""
__version__ = "0.1.0"

from .core import ClockSchedule, ServoConfig
from .noise_model import LaserNoiseSpec, coherence_time, preset
from .spin_states import EnsembleSpec, oat_moments, optimal_mu
from .analytic_stability import budget, sigma_dick, sigma_qpn
from .servo_sim import run_loop
from .fringe_mfpt import t_fringe_hop
from .optimizer import n_min, n_min_capped, optimize_tr, sigma_min

__all__ = [
    "ClockSchedule",
    "EnsembleSpec",
    "LaserNoiseSpec",
    "ServoConfig",
    "budget",
    "coherence_time",
    "n_min",
    "n_min_capped",
    "oat_moments",
    "optimal_mu",
    "optimize_tr",
    "preset",
    "run_loop",
    "sigma_dick",
    "sigma_min",
    "sigma_qpn",
    "t_fringe_hop",
]
