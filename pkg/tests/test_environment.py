"""Environment tests: block plan construction, the one-hot sampling
estimator's unbiasedness, accumulator bookkeeping, and pseudo-regret."""

import numpy as np
import pytest

from nmfbandit.environment import (
    Accumulators,
    build_plan,
    draw_context,
    draw_reward,
    matrix_sample,
    regret_of_trace,
)
from nmfbandit.errors import DimensionError, ParameterError
from nmfbandit.genmodel import BanditInstance, RewardModel, generate_simple


class TestBuildPlan:
    def test_remainder_partition(self):
        plan = build_plan(L=30, K=5, m=2, m_prime=2, seed=0)
        assert plan.n_blocks == 3 and plan.has_remainder_block
        assert [list(b) for b in plan.arm_blocks] == [[0, 1], [2, 3], [4]]

    def test_exact_partition_drops_remainder(self):
        plan = build_plan(L=30, K=4, m=2, m_prime=2, seed=0)
        assert plan.n_blocks == 2 and not plan.has_remainder_block
        assert [list(b) for b in plan.arm_blocks] == [[0, 1], [2, 3]]

    def test_deterministic_given_seed(self):
        a = build_plan(L=40, K=6, m=2, m_prime=3, seed=7)
        b = build_plan(L=40, K=6, m=2, m_prime=3, seed=7)
        assert np.array_equal(a.s0_arms, b.s0_arms)
        for x, y in zip(a.context_blocks, b.context_blocks):
            assert np.array_equal(x, y)

    def test_disjoint_blocks_and_index_maps(self):
        plan = build_plan(L=50, K=7, m=3, m_prime=3, seed=3)
        seen = np.concatenate(plan.context_blocks)
        assert len(seen) == len(set(seen))
        union = sorted(np.concatenate(plan.arm_blocks))
        assert union == list(range(7))
        for b, ctx in enumerate(plan.context_blocks):
            for pos, s in enumerate(ctx):
                assert plan.context_to_block[s] == b
                assert plan.context_pos[s] == pos

    def test_insufficient_contexts_reports_inequality(self):
        with pytest.raises(ParameterError, match="2\\*\\(l\\+1\\)\\*m'"):
            build_plan(L=10, K=6, m=2, m_prime=3, seed=0)


class TestMatrixSample:
    def test_singleton_arm_set(self):
        inst = generate_simple(8, 4, 2, 0.0, seed=1)
        rng = np.random.default_rng(0)
        for _ in range(10):
            arm, _ = matrix_sample(inst, 0, [3], rng)
            assert arm == 3

    def test_zero_mean_entry_never_rewards(self):
        U = np.array([[0.0, 0.8], [0.3, 0.6]])
        inst = BanditInstance(U=U)
        rng = np.random.default_rng(1)
        rewards = [matrix_sample(inst, 0, [0], rng)[1] for _ in range(200)]
        assert set(rewards) == {0.0}

    def test_empty_arm_set_rejected(self):
        inst = generate_simple(8, 4, 2, 0.0, seed=1)
        with pytest.raises(ParameterError):
            matrix_sample(inst, 0, [], np.random.default_rng(0))

    def test_one_hot_estimator_unbiased(self):
        # the indicator-weighted reward vector averages to U[s, arms]/p
        inst = generate_simple(10, 6, 2, 0.0, seed=2)
        rng = np.random.default_rng(3)
        arms = np.array([0, 2, 5])
        s, n = 4, 40_000
        acc = np.zeros(3)
        pos = {a: i for i, a in enumerate(arms)}
        for _ in range(n):
            arm, y = matrix_sample(inst, s, arms, rng)
            acc[pos[arm]] += y
        emp = acc / n
        target = inst.U[s, arms] / 3
        sigma = np.sqrt(target * (1 - target) / n)
        assert np.all(np.abs(emp - target) <= 4 * sigma + 1e-12)


class TestDrawContext:
    def test_point_mass(self):
        U = np.random.default_rng(0).random((4, 3))
        beta = np.array([0.0 + 1e-12, 1e-12, 1.0 - 3e-12, 1e-12])
        inst = BanditInstance(U=U, beta=beta / beta.sum())
        rng = np.random.default_rng(5)
        draws = {draw_context(inst, rng) for _ in range(50)}
        assert draws == {2}

    def test_uniform_frequencies(self):
        inst = generate_simple(5, 4, 2, 0.0, seed=4)
        rng = np.random.default_rng(6)
        n = 100_000
        counts = np.bincount([draw_context(inst, rng) for _ in range(n)], minlength=5)
        sigma = np.sqrt(n * 0.2 * 0.8)
        assert np.all(np.abs(counts - n * 0.2) <= 4 * sigma)

    def test_single_context(self):
        inst = BanditInstance(U=np.array([[0.2, 0.9]]))
        rng = np.random.default_rng(7)
        assert draw_context(inst, rng) == 0


class TestAccumulators:
    def test_count_bookkeeping(self):
        plan = build_plan(L=30, K=5, m=2, m_prime=2, seed=1)
        acc = Accumulators.for_plan(plan)
        acc.record_probe(3, 1, 1.0)
        acc.record_probe(3, 1, 0.0)
        acc.record_block(0, 2, 1, 1.0)
        assert acc.total_count() == 3
        assert acc.f_hat()[3, 1] == pytest.approx(0.5)
        assert acc.m_hats()[0][2, 1] == pytest.approx(1.0)

    def test_unsampled_entries_default_to_zero(self):
        plan = build_plan(L=30, K=5, m=2, m_prime=2, seed=1)
        acc = Accumulators.for_plan(plan)
        assert np.all(acc.f_hat() == 0.0)
        assert all(np.all(m == 0.0) for m in acc.m_hats())

    def test_probe_estimate_converges_to_means(self):
        # pin one context, stream sampling events, compare against U at the
        # Hoeffding-style bound 4*sqrt(1/(2n)) for n = 1e4 events
        inst = generate_simple(30, 5, 2, 0.0, seed=8)
        plan = build_plan(30, 5, 2, 2, seed=8)
        acc = Accumulators.for_plan(plan)
        rng = np.random.default_rng(9)
        s, n = 11, 10_000
        for _ in range(n):
            arm, y = matrix_sample(inst, s, plan.s0_arms, rng)
            acc.record_probe(s, plan.s0_col[arm], y)
        f_hat = acc.f_hat()
        bound = 4 * np.sqrt(1.0 / (2 * n / (2 * plan.m_prime)))
        err = np.abs(f_hat[s] - inst.U[s, plan.s0_arms]).max()
        assert err <= bound


class TestRegret:
    def test_genie_trace_is_zero(self):
        inst = generate_simple(6, 5, 2, 0.0, seed=10)
        contexts = np.random.default_rng(1).integers(0, 6, size=50)
        arms = np.argmax(inst.U, axis=1)[contexts]
        assert regret_of_trace(inst, contexts, arms)[-1] == 0.0

    def test_constant_gap_second_best(self):
        U = np.array([[0.9, 0.6], [0.8, 0.5]])  # both rows have gap 0.3
        inst = BanditInstance(U=U)
        contexts = np.array([0, 1, 0, 1])
        arms = np.array([1, 1, 1, 1])
        np.testing.assert_allclose(
            regret_of_trace(inst, contexts, arms), [0.3, 0.6, 0.9, 1.2]
        )

    def test_hand_evaluated_mixed_trace(self):
        U = np.array([[0.7, 0.2], [0.1, 0.9]])
        inst = BanditInstance(U=U)
        contexts = [0, 0, 1, 1, 0]
        arms = [0, 1, 1, 0, 1]
        expected = [0.0, 0.5, 0.5, 1.3, 1.8]
        np.testing.assert_allclose(regret_of_trace(inst, contexts, arms), expected)

    def test_invariant_to_reward_realizations(self):
        inst = generate_simple(6, 5, 2, 0.0, seed=11)
        contexts = np.random.default_rng(2).integers(0, 6, size=30)
        arms = np.random.default_rng(3).integers(0, 5, size=30)
        a = regret_of_trace(inst, contexts, arms)
        b = regret_of_trace(inst, contexts, arms)  # no rng involved at all
        assert np.array_equal(a, b)
        assert np.all(np.diff(a) >= -1e-15)

    def test_s2_compares_against_global_best(self):
        U = np.array([[0.7, 0.2], [0.1, 0.9]])
        inst = BanditInstance(U=U)
        out = regret_of_trace(inst, [0], [0], setting="S2")
        np.testing.assert_allclose(out, [0.2])

    def test_out_of_range_rejected(self):
        inst = generate_simple(6, 5, 2, 0.0, seed=12)
        with pytest.raises(DimensionError):
            regret_of_trace(inst, [0, 7], [0, 0])
        with pytest.raises(DimensionError):
            regret_of_trace(inst, [0], [9])

    def test_uniform_reward_draws_centered(self):
        inst = generate_simple(6, 5, 2, 0.0, seed=13, reward_model=RewardModel("uniform", width=0.4))
        rng = np.random.default_rng(4)
        draws = np.array([draw_reward(inst, 2, 3, rng) for _ in range(20_000)])
        mu = inst.U[2, 3]
        assert abs(draws.mean() - mu) < 4 * (0.4 / np.sqrt(12)) / np.sqrt(20_000)
        assert draws.min() >= mu - 0.2 and draws.max() <= mu + 0.2
