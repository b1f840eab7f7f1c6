"""Online policies: the epsilon-greedy NMF bandit, per-context UCB-1, and
per-context Thompson sampling, runnable in two settings.

S1: contexts arrive exogenously and regret is measured against the best arm
of each context. S2: the policy chooses the context as well, and regret is
measured against the best entry of the whole reward matrix (baselines then
treat the L*K cells as one flat arm space).
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .environment import (
    Accumulators,
    RegretTrace,
    build_plan,
    draw_context,
    draw_reward,
    regret_of_trace,
)
from .errors import NumericError, ParameterError
from .genmodel import BanditInstance
from .nmf import HottopixConfig, fit_A, fit_W_blocks, hottopix, spa_anchors

__all__ = [
    "NmfBanditConfig",
    "NmfBandit",
    "Ucb1",
    "Thompson",
    "epsilon_schedule",
    "gamma_schedule",
    "run_policy",
]


def epsilon_schedule(t, theta, m, m_prime, beta_min):
    """Explore probability min(1, theta*(2m'+m)/(beta*t)); nonincreasing in t."""
    if t < 1:
        raise ParameterError("t must be >= 1")
    return min(1.0, theta * (2 * m_prime + m) / (beta_min * t))


def gamma_schedule(t, theta):
    """Anchor-detection tolerance schedule max(1/t, 2/sqrt(theta))."""
    if t < 1:
        raise ParameterError("t must be >= 1")
    if theta <= 0:
        raise ParameterError("theta must be > 0")
    return max(1.0 / t, 2.0 / math.sqrt(theta))


@dataclass
class NmfBanditConfig:
    """Policy parameters. beta_min defaults to uniform (1/L) at reset; seed,
    when given, pins the sampling plan independently of the run seed."""

    m: int
    m_prime: int
    theta: float = 10.0
    beta_min: float | None = None
    refit: str = "geometric"  # "geometric" | "every_step"
    refit_ratio: float = 1.1
    anchor_method: str = "lp_hottopix"  # "lp_hottopix" | "spa"
    anchor_threshold: float = 0.5
    lp_max_rows: int = 200
    seed: int | None = None

    def validate(self):
        if self.theta <= 0:
            raise ParameterError("theta must be > 0")
        if self.refit not in ("geometric", "every_step"):
            raise ParameterError(f"unknown refit schedule {self.refit!r}")
        if self.refit == "geometric" and self.refit_ratio <= 1.0:
            raise ParameterError("geometric refit ratio must be > 1")
        if self.anchor_method not in ("lp_hottopix", "spa"):
            raise ParameterError(f"unknown anchor method {self.anchor_method!r}")
        return self


class NmfBandit:
    """Epsilon-greedy policy that explores structured arm subsets and exploits
    the argmax of the factored reward estimate."""

    name = "nmf_bandit"

    def __init__(self, config: NmfBanditConfig):
        self.cfg = config.validate()

    def reset(self, L, K, setting, rng):
        cfg = self.cfg
        self.L, self.K, self.setting = L, K, setting
        self.rng = rng
        self.beta_min = cfg.beta_min if cfg.beta_min is not None else 1.0 / L
        plan_seed = cfg.seed if cfg.seed is not None else int(rng.integers(2**63))
        self.plan = build_plan(L, K, cfg.m, cfg.m_prime, plan_seed)
        self.acc = Accumulators.for_plan(self.plan)
        self.U_hat = None
        self.A_hat = None
        self.W_hat = None
        self.anchor_rows = None
        self.cache_t = None
        self._next_refit = 1
        self._pending = None
        self.last_explore = False
        return self

    # -- explore helpers -------------------------------------------------

    def _explore_arm(self, context):
        plan = self.plan
        two_mp = 2 * plan.m_prime
        block = plan.context_to_block[context]
        in_remainder = (
            plan.has_remainder_block and block == plan.n_blocks - 1
        )
        width = plan.remainder if in_remainder else plan.m
        p_probe = two_mp / (width + two_mp)
        if self.rng.random() < p_probe:
            col = int(self.rng.integers(two_mp))
            self._pending = ("probe", context, col)
            return int(plan.s0_arms[col])
        if block < 0:
            # unassigned context: pull at random, discard the sample
            self._pending = None
            return int(self.rng.integers(self.K))
        col = int(self.rng.integers(len(plan.arm_blocks[block])))
        self._pending = ("block", block, plan.context_pos[context], col)
        return int(plan.arm_blocks[block][col])

    # -- exploit helpers -------------------------------------------------

    def _refit(self, t):
        cfg = self.cfg
        plan = self.plan
        f_hat = self.acc.f_hat()
        if cfg.anchor_method == "spa":
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                anchors = spa_anchors(f_hat, cfg.m)
            if len(anchors) < cfg.m:
                raise NumericError("probe estimate has rank below m")
            w_s = f_hat[anchors]
        else:
            eps = 2 * plan.m_prime * gamma_schedule(t, cfg.theta)
            anchors, w_s = hottopix(
                f_hat,
                HottopixConfig(
                    m=cfg.m,
                    epsilon=eps,
                    anchor_threshold=cfg.anchor_threshold,
                    lp_max_rows=cfg.lp_max_rows,
                ),
            )
        a_hat = fit_A(f_hat, w_s)
        w_hat = fit_W_blocks(a_hat, plan, self.acc.m_hats())
        self.A_hat, self.W_hat = a_hat, w_hat
        self.U_hat = a_hat @ w_hat
        self.anchor_rows = anchors
        self.cache_t = t

    def _maybe_refit(self, t):
        if self.cfg.refit == "every_step" or t >= self._next_refit:
            try:
                self._refit(t)
            except NumericError:
                pass  # keep the previous estimates (or none)
            self._next_refit = max(t + 1, math.ceil(t * self.cfg.refit_ratio))

    def inject_estimates(self, U_hat, A_hat=None, W_hat=None, t=0):
        """Diagnostic hook: install externally computed estimates."""
        self.U_hat = np.asarray(U_hat, dtype=float)
        self.A_hat, self.W_hat = A_hat, W_hat
        self.cache_t = t

    def exploit_arm(self, context):
        """Best arm for the context under the cached estimate (None if none)."""
        if self.U_hat is None:
            return None
        return int(np.argmax(self.U_hat[context]))

    def exploit_cell(self):
        """Best (context, arm) cell under the cached estimate (None if none)."""
        if self.U_hat is None:
            return None
        flat = int(np.argmax(self.U_hat))
        return flat // self.K, flat % self.K

    # -- policy interface ------------------------------------------------

    def _epsilon(self, t):
        return epsilon_schedule(t, self.cfg.theta, self.cfg.m, self.cfg.m_prime, self.beta_min)

    def select(self, t, context):
        self._pending = None
        self.last_explore = self.rng.random() < self._epsilon(t)
        if self.last_explore:
            return self._explore_arm(context)
        self._maybe_refit(t)
        arm = self.exploit_arm(context)
        return int(self.rng.integers(self.K)) if arm is None else arm

    def select_joint(self, t):
        self._pending = None
        self.last_explore = self.rng.random() < self._epsilon(t)
        if self.last_explore:
            context = int(self.rng.integers(self.L))
            return context, self._explore_arm(context)
        self._maybe_refit(t)
        cell = self.exploit_cell()
        if cell is None:
            return int(self.rng.integers(self.L)), int(self.rng.integers(self.K))
        return cell

    def update(self, t, context, arm, reward):
        if self._pending is None:
            return
        kind = self._pending[0]
        if kind == "probe":
            _, ctx, col = self._pending
            self.acc.record_probe(ctx, col, reward)
        else:
            _, block, row, col = self._pending
            self.acc.record_block(block, row, col, reward)
        self._pending = None


class Ucb1:
    """Per-context UCB-1; in S2 the same index runs over all L*K cells."""

    name = "ucb1"
    last_explore = False

    def reset(self, L, K, setting, rng):
        self.L, self.K, self.setting = L, K, setting
        self.counts = np.zeros((L, K))
        self.sums = np.zeros((L, K))
        self.visits = np.zeros(L, dtype=np.int64)
        self.total = 0
        self._init_ptr = 0
        return self

    def select(self, t, context):
        row_counts = self.counts[context]
        if self.visits[context] < self.K:
            return int(np.argmax(row_counts == 0))
        means = self.sums[context] / row_counts
        bonus = np.sqrt(2.0 * np.log(self.visits[context]) / row_counts)
        return int(np.argmax(means + bonus))

    def select_joint(self, t):
        if self._init_ptr < self.L * self.K:
            cell = self._init_ptr
            self._init_ptr += 1
            return cell // self.K, cell % self.K
        means = self.sums / self.counts
        bonus = np.sqrt(2.0 * np.log(self.total) / self.counts)
        flat = int(np.argmax(means + bonus))
        return flat // self.K, flat % self.K

    def update(self, t, context, arm, reward):
        self.counts[context, arm] += 1
        self.sums[context, arm] += reward
        self.visits[context] += 1
        self.total += 1


class Thompson:
    """Per-context Thompson sampling with Beta posteriors.

    Non-Bernoulli rewards are binarized by a coin flip with success
    probability clamp(reward / r_max, 0, 1); r_max comes from the config (the
    maximum reward scale) and defaults to 1.
    """

    name = "thompson"
    last_explore = False

    def __init__(self, r_max=1.0):
        if r_max <= 0:
            raise ParameterError("r_max must be > 0")
        self.r_max = r_max

    def reset(self, L, K, setting, rng):
        self.L, self.K, self.setting = L, K, setting
        self.rng = rng
        self.alpha = np.ones((L, K))
        self.beta = np.ones((L, K))
        return self

    def select(self, t, context):
        draws = self.rng.beta(self.alpha[context], self.beta[context])
        return int(np.argmax(draws))

    def select_joint(self, t):
        draws = self.rng.beta(self.alpha, self.beta)
        flat = int(np.argmax(draws))
        return flat // self.K, flat % self.K

    def update(self, t, context, arm, reward):
        if reward in (0.0, 1.0):
            success = bool(reward)
        else:
            p = min(max(reward / self.r_max, 0.0), 1.0)
            success = self.rng.random() < p
        if success:
            self.alpha[context, arm] += 1
        else:
            self.beta[context, arm] += 1


def run_policy(inst: BanditInstance, policy, T, setting="S1", seed=0):
    """Run one policy for T steps; returns the full trace.

    Deterministic per (policy config, seed): the environment and the policy
    consume independent child streams of the seed.
    """
    if T < 1:
        raise ParameterError("T must be >= 1")
    if setting not in ("S1", "S2"):
        raise ParameterError(f"unknown setting {setting!r}")
    env_ss, pol_ss = np.random.SeedSequence(seed).spawn(2)
    rng_env = np.random.default_rng(env_ss)
    rng_pol = np.random.default_rng(pol_ss)
    policy.reset(inst.L, inst.K, setting, rng_pol)
    if setting == "S2" and not hasattr(policy, "select_joint"):
        raise ParameterError(f"policy {policy.name} cannot choose contexts (S2)")

    contexts = np.empty(T, dtype=np.int64)
    arms = np.empty(T, dtype=np.int64)
    rewards = np.empty(T)
    explore = np.zeros(T, dtype=bool)
    start = time.perf_counter()
    for i in range(T):
        t = i + 1
        if setting == "S1":
            s = draw_context(inst, rng_env)
            a = policy.select(t, s)
        else:
            s, a = policy.select_joint(t)
        y = draw_reward(inst, s, a, rng_env)
        policy.update(t, s, a, y)
        contexts[i] = s
        arms[i] = a
        rewards[i] = y
        explore[i] = policy.last_explore
    wall = time.perf_counter() - start

    cum = regret_of_trace(inst, contexts, arms, setting=setting)
    trace = RegretTrace(
        t=np.arange(1, T + 1, dtype=np.int64),
        context=contexts,
        arm=arms,
        reward=rewards,
        explore=explore,
        cum_regret=cum,
    )
    trace.wall_time = wall
    return trace
