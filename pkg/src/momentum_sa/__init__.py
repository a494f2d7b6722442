"""Stochastic approximation with matrix momentum: SNR, PolSA, PolSA-D and NeSA.

Submodules: ``linalg`` (Lyapunov solvers, pseudo-inverse), ``sa_core``
(reference steppers), ``linear_model`` (synthetic linear root-finding
problems), ``variance`` (predicted asymptotic covariances), ``mdp`` and
``rl_algos`` (Q-learning and TD instantiations), ``harness`` (seeded
Monte-Carlo trials), ``kernels`` (compiled inner loops) and ``cli``.
"""

from . import harness, kernels, linalg, linear_model, mdp, rl_algos, sa_core, variance
from .sa_core import AlgorithmKind, GainSchedule, IterateState, LinearSample

__version__ = "0.1.0"

__all__ = [
    "AlgorithmKind",
    "GainSchedule",
    "IterateState",
    "LinearSample",
    "harness",
    "kernels",
    "linalg",
    "linear_model",
    "mdp",
    "rl_algos",
    "sa_core",
    "variance",
]
