# vaml_lab/tests/test_mdp.py
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from vaml_lab.core import (
    ControlMdp,
    FiniteMdp,
    ValueTable,
    bellman_operator,
    exact_value,
    induce_policy_kernel,
    sample_trajectory,
)
from vaml_lab.core.mdp import exact_policy_iteration, policy_evaluation, uniform_policy
from vaml_lab.logic.garnet import random_mdp

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


def swap_chain():
    return FiniteMdp(SWAP, np.array([1.0, 0.0]), 0.5)


def coin_chain():
    return FiniteMdp(np.full((2, 2), 0.5), np.array([1.0, 0.0]), 0.5)


def line_chain():
    # 0 -> 1 -> 2, el estado 2 es absorbente
    p = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
    return FiniteMdp(p, np.array([1.0, 2.0, 3.0]), 0.9)


class TestFiniteMdp(unittest.TestCase):
    def test_rejects_rows_not_summing_to_one(self):
        with self.assertRaises(ValueError):
            FiniteMdp(np.array([[0.5, 0.4], [0.5, 0.5]]), np.zeros(2), 0.9)

    def test_rejects_discount_one(self):
        with self.assertRaises(ValueError):
            FiniteMdp(np.eye(2), np.zeros(2), 1.0)

    def test_rejects_negative_entries(self):
        with self.assertRaises(ValueError):
            FiniteMdp(np.array([[1.5, -0.5], [0.0, 1.0]]), np.zeros(2), 0.9)

    def test_arrays_are_read_only(self):
        mdp = swap_chain()
        with self.assertRaises(ValueError):
            mdp.transition[0, 0] = 1.0


class TestExactValue(unittest.TestCase):
    def test_single_state(self):
        mdp = FiniteMdp(np.array([[1.0]]), np.array([1.0]), 0.9)
        self.assertAlmostEqual(exact_value(mdp)[0], 10.0, places=10)

    def test_two_state_swap(self):
        assert_allclose(exact_value(swap_chain()), [4.0 / 3.0, 2.0 / 3.0], atol=1e-12)

    def test_zero_discount_returns_reward(self):
        rng = np.random.default_rng(3)
        mdp = random_mdp(rng, 6, discount=0.0)
        assert_allclose(exact_value(mdp), mdp.reward, atol=1e-14)

    def test_bellman_residual_on_random_problems(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            mdp = random_mdp(rng, int(rng.integers(2, 20)), discount=float(rng.uniform(0.0, 0.99)))
            v = exact_value(mdp)
            self.assertLess(np.max(np.abs(v - bellman_operator(mdp, v, 1))), 1e-9)


class TestBellmanOperator(unittest.TestCase):
    def test_zero_steps_is_identity(self):
        mdp = swap_chain()
        v = np.array([3.0, -1.0])
        assert_array_equal(bellman_operator(mdp, v, 0), v)

    def test_zero_vector_one_step_is_reward(self):
        mdp = line_chain()
        assert_allclose(bellman_operator(mdp, np.zeros(3), 1), mdp.reward)

    def test_constant_vector(self):
        mdp = line_chain()
        c = 2.5
        assert_allclose(bellman_operator(mdp, np.full(3, c), 1), mdp.reward + mdp.discount * c)

    def test_multi_step_consistency(self):
        rng = np.random.default_rng(11)
        mdp = random_mdp(rng, 5)
        v = rng.standard_normal(5)
        for b in range(1, 5):
            assert_allclose(
                bellman_operator(mdp, v, b),
                bellman_operator(mdp, bellman_operator(mdp, v, b - 1), 1),
                atol=1e-12,
            )

    def test_fixed_point(self):
        mdp = line_chain()
        v = exact_value(mdp)
        assert_allclose(bellman_operator(mdp, v, 3), v, atol=1e-10)

    def test_negative_steps_raise(self):
        with self.assertRaises(ValueError):
            bellman_operator(swap_chain(), np.zeros(2), -1)


class TestSampleTrajectory(unittest.TestCase):
    def test_deterministic_chain(self):
        traj = sample_trajectory(line_chain(), 0, 2, np.random.default_rng(0))
        self.assertEqual(traj.states, (0, 1, 2))
        self.assertEqual(traj.rewards, (1.0, 2.0))

    def test_zero_length(self):
        traj = sample_trajectory(line_chain(), 1, 0, np.random.default_rng(0))
        self.assertEqual(traj.states, (1,))
        self.assertEqual(traj.rewards, ())
        self.assertEqual(traj.length, 0)

    def test_reproducible_with_same_seed(self):
        mdp = random_mdp(np.random.default_rng(5), 6)
        a = sample_trajectory(mdp, 2, 50, np.random.default_rng(42))
        b = sample_trajectory(mdp, 2, 50, np.random.default_rng(42))
        self.assertEqual(a, b)

    def test_empirical_frequency(self):
        traj = sample_trajectory(coin_chain(), 0, 100_000, np.random.default_rng(1))
        states = np.array(traj.states)
        from_zero = states[:-1] == 0
        stay = np.mean(states[1:][from_zero] == 0)
        self.assertAlmostEqual(stay, 0.5, delta=0.01)

    def test_invalid_start(self):
        with self.assertRaises(ValueError):
            sample_trajectory(swap_chain(), 5, 1, np.random.default_rng(0))


class TestPolicyKernel(unittest.TestCase):
    def setUp(self):
        stay = np.eye(2)
        self.cmdp = ControlMdp(np.stack([stay, SWAP]), np.array([0.0, 1.0]), 0.9)

    def test_one_hot_policy_copies_action_rows(self):
        policy = np.array([[0.0, 1.0], [1.0, 0.0]])
        mdp = induce_policy_kernel(self.cmdp, policy)
        assert_allclose(mdp.transition, [[0.0, 1.0], [0.0, 1.0]])

    def test_identical_actions(self):
        same = ControlMdp(np.stack([SWAP, SWAP]), np.zeros(2), 0.9)
        mdp = induce_policy_kernel(same, uniform_policy(same))
        assert_allclose(mdp.transition, SWAP)

    def test_uniform_policy_averages(self):
        mdp = induce_policy_kernel(self.cmdp, uniform_policy(self.cmdp))
        assert_allclose(mdp.transition, np.full((2, 2), 0.5))

    def test_invalid_policy_shape(self):
        with self.assertRaises(ValueError):
            induce_policy_kernel(self.cmdp, np.ones((3, 2)) / 2)

    def test_exact_policy_iteration_prefers_rewarding_state(self):
        policy, v, history = exact_policy_iteration(self.cmdp)
        # desde 0 conviene cambiar a 1; en 1 conviene quedarse
        assert_array_equal(policy, [[0.0, 1.0], [1.0, 0.0]])
        assert_allclose(v, policy_evaluation(self.cmdp, policy))
        self.assertGreaterEqual(len(history), 2)


class TestValueTable(unittest.TestCase):
    def test_refresh_copies(self):
        table = ValueTable.zeros(3)
        table.values = np.array([1.0, 2.0, 3.0])
        assert_array_equal(table.target_values, np.zeros(3))
        table.refresh_target()
        assert_array_equal(table.target_values, [1.0, 2.0, 3.0])
        table.values[0] = 10.0
        self.assertEqual(table.target_values[0], 1.0)

    def test_rejects_non_finite(self):
        with self.assertRaises(ValueError):
            ValueTable(np.array([0.0, np.nan]))


if __name__ == "__main__":
    unittest.main()
