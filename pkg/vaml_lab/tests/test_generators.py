# vaml_lab/tests/test_generators.py
import math
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from vaml_lab.core.mdp import exact_policy_iteration
from vaml_lab.logic.cliffwalk import (
    CLIFF,
    GOAL,
    START,
    CliffwalkSpec,
    action_index,
    generate_cliffwalk,
    state_index,
)
from vaml_lab.logic.garnet import NON_SUCCESSOR_LOGIT, GarnetSpec, garnet_logits, generate_garnet
from vaml_lab.solve.path_search import brute_force_optimal_return

OPTIMAL_RETURN = -(1.0 - 0.9**6) / (1.0 - 0.9)


class TestGarnet(unittest.TestCase):
    def test_rows_have_exactly_k_successors(self):
        mdp = generate_garnet(GarnetSpec(50, 10, 1.0, seed=0))
        for row in mdp.transition:
            self.assertEqual(int(np.sum(row > 1e-30)), 10)
            self.assertAlmostEqual(row.sum(), 1.0, delta=1e-12)

    def test_low_temperature_is_nearly_deterministic(self):
        spec = GarnetSpec(50, 10, 1e-6, seed=4)
        mdp = generate_garnet(spec)
        logits = garnet_logits(spec)
        assert_array_equal(np.argmax(mdp.transition, axis=1), np.argmax(logits, axis=1))
        self.assertTrue(np.all(mdp.transition.max(axis=1) > 0.99))

    def test_high_temperature_is_uniform_on_successors(self):
        mdp = generate_garnet(GarnetSpec(50, 10, 1e6, seed=4))
        for row in mdp.transition:
            support = row[row > 1e-30]
            self.assertEqual(support.size, 10)
            assert_allclose(support, 0.1, atol=1e-4)

    def test_extreme_temperatures_keep_rows_valid(self):
        for tau in (1e-6, 1e-3, 1.0, 10.0, 1e6):
            mdp = generate_garnet(GarnetSpec(20, 5, tau, seed=1))
            self.assertTrue(np.all(np.isfinite(mdp.transition)))
            assert_allclose(mdp.transition.sum(axis=1), 1.0, atol=1e-12)

    def test_same_spec_same_problem(self):
        a = generate_garnet(GarnetSpec(30, 5, 0.5, seed=123))
        b = generate_garnet(GarnetSpec(30, 5, 0.5, seed=123))
        assert_array_equal(a.transition, b.transition)
        assert_array_equal(a.reward, b.reward)

    def test_distinct_seeds_give_distinct_supports(self):
        supports = set()
        for seed in range(100):
            mdp = generate_garnet(GarnetSpec(50, 10, 1.0, seed=seed))
            supports.add((mdp.transition > 1e-30).tobytes())
        self.assertEqual(len(supports), 100)

    def test_temperature_only_changes_sharpness(self):
        cold_spec, warm_spec = GarnetSpec(30, 5, 0.01, seed=9), GarnetSpec(30, 5, 10.0, seed=9)
        cold_logits, warm_logits = garnet_logits(cold_spec), garnet_logits(warm_spec)
        support = cold_logits > NON_SUCCESSOR_LOGIT
        assert_array_equal(support, warm_logits > NON_SUCCESSOR_LOGIT)
        assert_allclose(cold_logits[support] * 0.01, warm_logits[support] * 10.0, rtol=1e-12)
        assert_array_equal(generate_garnet(cold_spec).reward, generate_garnet(warm_spec).reward)

    def test_moderate_temperatures_share_transition_support(self):
        sharp = generate_garnet(GarnetSpec(30, 5, 0.5, seed=9))
        flat = generate_garnet(GarnetSpec(30, 5, 10.0, seed=9))
        assert_array_equal(sharp.transition > 0.0, flat.transition > 0.0)

    def test_large_seed_is_accepted(self):
        mdp = generate_garnet(GarnetSpec(10, 3, 1.0, seed=2**64 - 1))
        self.assertEqual(mdp.n_states, 10)

    def test_invalid_spec(self):
        with self.assertRaises(ValueError):
            GarnetSpec(5, 6)
        with self.assertRaises(ValueError):
            GarnetSpec(5, 2, temperature=0.0)
        with self.assertRaises(ValueError):
            GarnetSpec(5, 2, temperature=math.inf)


class TestCliffwalk(unittest.TestCase):
    def test_deterministic_move_right(self):
        cmdp = generate_cliffwalk(CliffwalkSpec(move_prob=1.0))
        center = state_index(2, 2)
        self.assertEqual(cmdp.transition[action_index("right"), center, state_index(2, 3)], 1.0)
        self.assertEqual(cmdp.transition[action_index("up"), center, state_index(1, 2)], 1.0)

    def test_quarter_move_prob_is_direction_independent(self):
        cmdp = generate_cliffwalk(CliffwalkSpec(move_prob=0.25))
        center = state_index(2, 2)
        for a in range(cmdp.n_actions):
            assert_allclose(cmdp.transition[a, center], cmdp.transition[0, center], atol=1e-15)
        neighbors = [state_index(1, 2), state_index(3, 2), state_index(2, 1), state_index(2, 3)]
        assert_allclose(cmdp.transition[0, center, neighbors], 0.25, atol=1e-15)

    def test_rows_are_stochastic(self):
        for move_prob in (0.33, 0.66, 0.99, 1.0):
            cmdp = generate_cliffwalk(CliffwalkSpec(move_prob=move_prob))
            assert_allclose(cmdp.transition.sum(axis=2), 1.0, atol=1e-12)

    def test_cliff_goal_and_rewards(self):
        cmdp = generate_cliffwalk(CliffwalkSpec())
        self.assertEqual((cmdp.n_actions, cmdp.n_states), (4, 25))
        for a in range(4):
            self.assertEqual(cmdp.transition[a, GOAL, GOAL], 1.0)
            for cliff in CLIFF:
                self.assertEqual(cmdp.transition[a, cliff, START], 1.0)
        self.assertEqual(cmdp.reward[GOAL], 0.0)
        self.assertEqual(cmdp.reward[CLIFF[0]], -100.0)
        self.assertEqual(cmdp.reward[START], -1.0)

    def test_wall_keeps_agent_in_place(self):
        cmdp = generate_cliffwalk(CliffwalkSpec(move_prob=1.0))
        self.assertEqual(cmdp.transition[action_index("left"), START, START], 1.0)

    def test_unknown_action(self):
        with self.assertRaises(ValueError):
            action_index("jump")

    def test_invalid_move_prob(self):
        with self.assertRaises(ValueError):
            CliffwalkSpec(move_prob=0.0)


class TestPathSearch(unittest.TestCase):
    def test_deterministic_optimum(self):
        cmdp = generate_cliffwalk(CliffwalkSpec(move_prob=1.0))
        depths = []
        result = brute_force_optimal_return(cmdp, START, GOAL, on_depth=depths.append)
        self.assertIsNotNone(result)
        self.assertEqual(len(result.actions), 6)
        self.assertEqual(result.states[0], START)
        self.assertEqual(result.states[-1], GOAL)
        self.assertTrue(all(s not in CLIFF for s in result.states))
        self.assertAlmostEqual(result.discounted_return, OPTIMAL_RETURN, places=10)
        self.assertEqual(depths, [1, 2, 3, 4, 5, 6])

    def test_matches_exact_policy_iteration(self):
        cmdp = generate_cliffwalk(CliffwalkSpec(move_prob=1.0))
        _, v, _ = exact_policy_iteration(cmdp)
        result = brute_force_optimal_return(cmdp, START, GOAL)
        self.assertAlmostEqual(v[START], result.discounted_return, places=10)

    def test_start_at_goal(self):
        cmdp = generate_cliffwalk(CliffwalkSpec(move_prob=1.0))
        result = brute_force_optimal_return(cmdp, GOAL, GOAL)
        self.assertEqual(result.actions, ())
        self.assertEqual(result.discounted_return, 0.0)

    def test_depth_limit(self):
        cmdp = generate_cliffwalk(CliffwalkSpec(move_prob=1.0))
        self.assertIsNone(brute_force_optimal_return(cmdp, START, GOAL, max_depth=5))

    def test_cancel(self):
        cmdp = generate_cliffwalk(CliffwalkSpec(move_prob=1.0))
        self.assertIsNone(brute_force_optimal_return(cmdp, START, GOAL, should_cancel=lambda: True))

    def test_rejects_stochastic_transitions(self):
        with self.assertRaises(ValueError):
            brute_force_optimal_return(generate_cliffwalk(CliffwalkSpec(move_prob=0.99)), START, GOAL)


if __name__ == "__main__":
    unittest.main()
