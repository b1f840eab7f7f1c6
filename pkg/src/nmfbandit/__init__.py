"""Latent contextual bandits with NMF-based reward estimation.

A simulation laboratory: instance generators with ground-truth low-rank
structure, robust separable NMF (LP anchor detection plus fast fallbacks),
an epsilon-greedy bandit policy built on those pieces, classical per-context
baselines, and a batch experiment harness producing regret traces.
"""

from .algorithms import (
    NmfBandit,
    NmfBanditConfig,
    Thompson,
    Ucb1,
    epsilon_schedule,
    gamma_schedule,
    run_policy,
)
from .environment import (
    Accumulators,
    RegretTrace,
    SamplingPlan,
    build_plan,
    draw_context,
    draw_reward,
    matrix_sample,
    regret_of_trace,
)
from .genmodel import (
    BanditInstance,
    RewardModel,
    TheoryModelParams,
    check_wstrip_l1,
    check_wstrip_l2,
    generate_lower_bound,
    generate_simple,
    generate_theory,
    lower_bound_value,
)
from .linalg import least_squares, norm_inf1, norm_inf_inf, psi1_m, psi_m, singular_values
from .lp import LinearProgram, LpSolution, solve
from .nmf import (
    HottopixConfig,
    NmfEstimate,
    RobustSeparableNMF,
    fit_A,
    fit_W_blocks,
    hottopix,
    spa_anchors,
)

__version__ = "0.1.0"

__all__ = [
    "NmfBandit",
    "NmfBanditConfig",
    "Thompson",
    "Ucb1",
    "epsilon_schedule",
    "gamma_schedule",
    "run_policy",
    "Accumulators",
    "RegretTrace",
    "SamplingPlan",
    "build_plan",
    "draw_context",
    "draw_reward",
    "matrix_sample",
    "regret_of_trace",
    "BanditInstance",
    "RewardModel",
    "TheoryModelParams",
    "check_wstrip_l1",
    "check_wstrip_l2",
    "generate_lower_bound",
    "generate_simple",
    "generate_theory",
    "lower_bound_value",
    "least_squares",
    "norm_inf1",
    "norm_inf_inf",
    "psi1_m",
    "psi_m",
    "singular_values",
    "LinearProgram",
    "LpSolution",
    "solve",
    "HottopixConfig",
    "NmfEstimate",
    "RobustSeparableNMF",
    "fit_A",
    "fit_W_blocks",
    "hottopix",
    "spa_anchors",
]
