"""Stochastic environment: context arrival, reward draws, and the fixed
sampling structures (probe arm set, context blocks, per-block arm sets) with
their sample accumulators.

Block layout: with l = K // m and r = K mod m, arm block i in {1..l} holds
arms (i-1)m .. im-1 (0-based contiguous) and, when r > 0, a final block holds
the r remainder arms. Each block is paired with a disjoint set of 2m'
contexts; contexts outside every block contribute nothing to the estimates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .genmodel import BanditInstance

__all__ = [
    "SamplingPlan",
    "Accumulators",
    "build_plan",
    "matrix_sample",
    "draw_reward",
    "draw_context",
    "RegretTrace",
    "regret_of_trace",
]


@dataclass
class SamplingPlan:
    """Fixed index structures used by the explore phase."""

    L: int
    K: int
    m: int
    m_prime: int
    s0_arms: np.ndarray  # 2m' distinct probe arms
    context_blocks: list  # n_blocks disjoint context index arrays, each 2m'
    arm_blocks: list  # n_blocks arm index arrays (width m, last may be r)
    context_to_block: np.ndarray  # L -> block index or -1
    context_pos: np.ndarray  # L -> row position within its block, or -1
    s0_col: np.ndarray  # K -> column in the probe accumulator, or -1

    @property
    def n_blocks(self):
        return len(self.arm_blocks)

    @property
    def remainder(self):
        return self.K % self.m

    @property
    def has_remainder_block(self):
        return self.remainder > 0


def build_plan(L, K, m, m_prime, seed):
    """Sample the probe arm set and the per-block context sets.

    Deterministic given the seed. Requires L large enough to house one
    disjoint 2m'-context set per arm block.
    """
    if m < 1 or K < m:
        raise ParameterError(f"need K >= m >= 1, got K={K}, m={m}")
    if m_prime < 1 or 2 * m_prime > K:
        raise ParameterError(f"need 1 <= m', 2m' <= K; got m'={m_prime}, K={K}")
    l = K // m
    r = K % m
    n_blocks = l + (1 if r else 0)
    needed = 2 * n_blocks * m_prime
    if L < needed:
        raise ParameterError(
            f"not enough contexts for the block design: need "
            f"L >= 2*(l+1)*m' = {needed} with l = {l}, m' = {m_prime}; got L = {L}"
        )
    rng = np.random.default_rng(seed)
    s0 = np.sort(rng.choice(K, size=2 * m_prime, replace=False))
    chosen = rng.choice(L, size=needed, replace=False)
    context_blocks = [
        np.sort(chosen[2 * m_prime * i : 2 * m_prime * (i + 1)]) for i in range(n_blocks)
    ]
    arm_blocks = [np.arange(i * m, (i + 1) * m) for i in range(l)]
    if r:
        arm_blocks.append(np.arange(l * m, K))

    context_to_block = np.full(L, -1, dtype=int)
    context_pos = np.full(L, -1, dtype=int)
    for b, ctx in enumerate(context_blocks):
        context_to_block[ctx] = b
        context_pos[ctx] = np.arange(len(ctx))
    s0_col = np.full(K, -1, dtype=int)
    s0_col[s0] = np.arange(len(s0))
    return SamplingPlan(
        L=L,
        K=K,
        m=m,
        m_prime=m_prime,
        s0_arms=s0,
        context_blocks=context_blocks,
        arm_blocks=arm_blocks,
        context_to_block=context_to_block,
        context_pos=context_pos,
        s0_col=s0_col,
    )


@dataclass
class Accumulators:
    """Reward sums and pull counts for the probe matrix and each block.

    Estimates are elementwise empirical means (entries never sampled default
    to 0), so the probe estimate converges to U restricted to the probe arms
    and block estimate i to U[S(i), arms(i)].
    """

    f_sum: np.ndarray
    f_count: np.ndarray
    m_sums: list
    m_counts: list

    @classmethod
    def for_plan(cls, plan: SamplingPlan):
        width = 2 * plan.m_prime
        return cls(
            f_sum=np.zeros((plan.L, width)),
            f_count=np.zeros((plan.L, width), dtype=np.int64),
            m_sums=[np.zeros((len(c), len(a))) for c, a in zip(plan.context_blocks, plan.arm_blocks)],
            m_counts=[
                np.zeros((len(c), len(a)), dtype=np.int64)
                for c, a in zip(plan.context_blocks, plan.arm_blocks)
            ],
        )

    def record_probe(self, context, col, reward):
        self.f_sum[context, col] += reward
        self.f_count[context, col] += 1

    def record_block(self, block, row, col, reward):
        self.m_sums[block][row, col] += reward
        self.m_counts[block][row, col] += 1

    def f_hat(self):
        return self.f_sum / np.maximum(self.f_count, 1)

    def m_hats(self):
        return [s / np.maximum(c, 1) for s, c in zip(self.m_sums, self.m_counts)]

    def total_count(self):
        return int(self.f_count.sum() + sum(int(c.sum()) for c in self.m_counts))


def draw_reward(inst: BanditInstance, context, arm, rng):
    """One reward draw for (context, arm) under the instance's reward model."""
    return inst.reward_model.draw(inst.U[context, arm], rng)


def matrix_sample(inst: BanditInstance, context, arm_set, rng):
    """Pull a uniformly random arm from arm_set; returns (arm, reward)."""
    arm_set = np.asarray(arm_set)
    if arm_set.size == 0:
        raise ParameterError("arm_set must be nonempty")
    arm = int(arm_set[rng.integers(arm_set.size)])
    return arm, draw_reward(inst, context, arm, rng)


def draw_context(inst: BanditInstance, rng):
    """Categorical draw from beta via inverse CDF."""
    return int(np.searchsorted(inst.beta_cdf, rng.random(), side="right"))


@dataclass
class RegretTrace:
    """Per-step record of one policy run plus summary statistics."""

    t: np.ndarray
    context: np.ndarray
    arm: np.ndarray
    reward: np.ndarray
    explore: np.ndarray
    cum_regret: np.ndarray
    final_regret: float = 0.0
    explore_count: int = 0
    wall_time: float = 0.0

    def __post_init__(self):
        n = len(self.t)
        for name in ("context", "arm", "reward", "explore", "cum_regret"):
            if len(getattr(self, name)) != n:
                raise DimensionError(f"trace column {name} has mismatched length")
        if n:
            self.final_regret = float(self.cum_regret[-1])
            self.explore_count = int(np.sum(self.explore))

    def __len__(self):
        return len(self.t)


def regret_of_trace(inst: BanditInstance, contexts, arms, setting="S1"):
    """Cumulative pseudo-regret of a (context, arm) sequence against U.

    S1 compares each step with the best arm of its context; S2 with the best
    entry of the whole matrix. Depends only on the chosen cells, never on
    realized rewards. Nondecreasing, starts at the first step's shortfall.
    """
    contexts = np.asarray(contexts, dtype=int)
    arms = np.asarray(arms, dtype=int)
    if contexts.shape != arms.shape:
        raise DimensionError("contexts and arms must have equal length")
    if contexts.size and (
        contexts.min() < 0
        or contexts.max() >= inst.L
        or arms.min() < 0
        or arms.max() >= inst.K
    ):
        raise DimensionError("trace references an out-of-range context or arm")
    if setting == "S1":
        target = inst.U.max(axis=1)[contexts]
    elif setting == "S2":
        target = inst.U.max()
    else:
        raise ParameterError(f"unknown setting {setting!r}")
    inst_regret = target - inst.U[contexts, arms]
    return np.cumsum(inst_regret)
