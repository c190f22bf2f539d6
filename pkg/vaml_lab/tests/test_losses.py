# vaml_lab/tests/test_losses.py
import itertools
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from vaml_lab.core import FiniteMdp, Trajectory, bellman_operator, exact_value, sample_trajectory
from vaml_lab.logic.garnet import random_mdp
from vaml_lab.losses import (
    LossSpec,
    cvaml_sampled,
    expected_muzero_loss,
    expected_td_loss,
    expected_vaml_loss,
    itervaml_expectation,
    itervaml_sampled,
    kl_loss,
    muzero_loss,
    sampled_vaml_loss,
    td_loss,
    variance_estimate,
)
from vaml_lab.losses.expected import target_moments
from vaml_lab.losses.kl import kl_loss_batch, kl_rows
from vaml_lab.losses.sampled import score_function_gradients
from vaml_lab.model import LowRankModel, init_model
from vaml_lab.model.low_rank import kernel_power
from vaml_lab.solve.gradcheck import model_gradient_error, numerical_gradient, relative_error
from vaml_lab.solve.propositions import expectation_over_tuples

PERMUTATION = np.array([1, 2, 3, 0])


def point_mass_model(successor: np.ndarray, scale: float = 100.0) -> LowRankModel:
    n = len(successor)
    phi = np.zeros((n, n))
    phi[np.arange(n), successor] = scale
    return LowRankModel(phi, np.eye(n))


def permutation_mdp(reward: np.ndarray, discount: float = 0.9) -> FiniteMdp:
    n = len(PERMUTATION)
    p = np.zeros((n, n))
    p[np.arange(n), PERMUTATION] = 1.0
    return FiniteMdp(p, reward, discount)


def small_problem(seed: int, n: int = 3):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(rng, n)
    model = init_model(n, n, 1.0, rng)
    v = rng.standard_normal(n)
    return mdp, model, v, rng


def sequence_table(kernel: np.ndarray, start: int, m: int):
    """Todas las secuencias de m pasos desde `start` con su probabilidad."""
    n = kernel.shape[0]
    seqs, probs = [], []
    for seq in itertools.product(range(n), repeat=m):
        prob, prev = 1.0, start
        for x in seq:
            prob *= kernel[prev, x]
            prev = x
        seqs.append(np.array(seq))
        probs.append(prob)
    return seqs, np.array(probs)


class TestSampledEstimators(unittest.TestCase):
    def test_itervaml_examples(self):
        self.assertEqual(itervaml_sampled(np.array([2.0]), 5.0), 9.0)
        self.assertEqual(itervaml_sampled(np.array([1.0, 1.0, 1.0]), 1.0), 0.0)
        self.assertAlmostEqual(itervaml_sampled(np.array([1.0, 2.0, 3.0]), 0.0), 4.0, places=12)

    def test_variance_estimate_examples(self):
        self.assertEqual(variance_estimate(np.array([0.0, 2.0])), 1.0)
        self.assertEqual(variance_estimate(np.array([3.0, 3.0, 3.0])), 0.0)
        self.assertAlmostEqual(variance_estimate(np.array([1.0, 2.0, 3.0, 4.0])), 1.25, places=12)

    def test_variance_needs_two_samples(self):
        with self.assertRaises(ValueError):
            variance_estimate(np.array([1.0]))
        with self.assertRaises(ValueError):
            cvaml_sampled(np.array([1.0]), 0.0)

    def test_cvaml_can_be_negative(self):
        self.assertEqual(cvaml_sampled(np.array([0.0, 2.0]), 1.0), -1.0)

    def test_cvaml_equals_itervaml_without_spread(self):
        values = np.array([4.0, 4.0])
        self.assertEqual(cvaml_sampled(values, 1.0), itervaml_sampled(values, 1.0))


class TestExpectedLosses(unittest.TestCase):
    def test_decomposition_matches_enumeration(self):
        mdp, model, v, _ = small_problem(1)
        kernel = model.kernel()
        for x in range(3):
            env = mdp.transition[x]
            for k in (1, 2, 3):
                enumerated = expectation_over_tuples(lambda t: env @ (np.mean(v[t]) - v) ** 2, kernel[x], k)
                spec = LossSpec(1, 0, k, False, "none")
                closed = expected_vaml_loss(model, mdp, v, spec, states=[x]).loss_value
                self.assertAlmostEqual(enumerated, closed, places=12)

    def test_calibrated_expectation_drops_model_variance(self):
        mdp, model, v, _ = small_problem(2)
        kernel = model.kernel()
        for x in range(3):
            env = mdp.transition[x]
            for k in (2, 3):
                enumerated = expectation_over_tuples(
                    lambda t: env @ np.array([cvaml_sampled(v[t], y) for y in v]), kernel[x], k
                )
                spec = LossSpec(1, 0, k, True, "none")
                closed = expected_vaml_loss(model, mdp, v, spec, states=[x]).loss_value
                self.assertAlmostEqual(enumerated, closed, places=12)
                uncal = expected_vaml_loss(model, mdp, v, LossSpec(1, 0, k, False, "none"), states=[x]).loss_value
                var_model = kernel[x] @ v**2 - (kernel[x] @ v) ** 2
                self.assertAlmostEqual(uncal - closed, var_model / k, places=12)

    def test_cvaml_is_unbiased_for_itervaml_expectation(self):
        mdp, model, v, _ = small_problem(3)
        kernel = model.kernel()
        for x in range(3):
            env_mean = float(mdp.transition[x] @ v)
            enumerated = expectation_over_tuples(lambda t: cvaml_sampled(v[t], env_mean), kernel[x], 2)
            self.assertAlmostEqual(enumerated, itervaml_expectation(model, mdp, v, 1, x), places=12)

    def test_perfect_model_has_zero_loss(self):
        rng = np.random.default_rng(4)
        model = init_model(4, 4, 1.0, rng)
        mdp = FiniteMdp(model.kernel(), rng.standard_normal(4), 0.9)
        v = rng.standard_normal(4)
        for m in (1, 2):
            for x in range(4):
                self.assertEqual(itervaml_expectation(model, mdp, v, m, x), 0.0)
        model_backup = model.kernel() @ v
        env_backup = mdp.transition @ v
        self.assertLessEqual(np.max(np.abs(model_backup - env_backup)), 1e-10)

    def test_zero_loss_model_differs_from_environment(self):
        # el entorno intercambia los sucesores 0 y 1, que tienen el mismo valor
        rng = np.random.default_rng(14)
        model = init_model(4, 4, 1.0, rng)
        kernel = model.kernel()
        mdp = FiniteMdp(kernel[:, [1, 0, 2, 3]], rng.standard_normal(4), 0.9)
        v = np.array([2.0, 2.0, -1.0, 0.5])
        self.assertGreater(np.max(np.abs(kernel - mdp.transition)), 1e-3)
        for x in range(4):
            self.assertLessEqual(itervaml_expectation(model, mdp, v, 1, x), 1e-20)
        self.assertLessEqual(np.max(np.abs(kernel @ v - mdp.transition @ v)), 1e-10)

    def test_constant_value_has_zero_loss(self):
        mdp, model, _, _ = small_problem(5)
        v = np.full(3, 7.0)
        for x in range(3):
            self.assertAlmostEqual(itervaml_expectation(model, mdp, v, 1, x), 0.0, delta=1e-20)

    def test_collapse_when_model_and_environment_are_deterministic(self):
        mdp = permutation_mdp(np.arange(4.0))
        model = point_mass_model(PERMUTATION)
        v = np.array([0.5, -1.0, 2.0, 3.0])
        uncal = expected_vaml_loss(model, mdp, v, LossSpec(1, 0, 2, False, "none"))
        cal = expected_vaml_loss(model, mdp, v, LossSpec(1, 0, 2, True, "none"))
        self.assertAlmostEqual(uncal.loss_value, cal.loss_value, places=12)
        assert_allclose(uncal.model_grads.d_phi, cal.model_grads.d_phi, atol=1e-12)
        assert_allclose(uncal.model_grads.d_psi, cal.model_grads.d_psi, atol=1e-12)

    def test_target_moments(self):
        mdp, _, v, _ = small_problem(6)
        mean, second = target_moments(mdp, v, 0)
        assert_array_equal(mean, v)
        assert_array_equal(second, v**2)
        mean, second = target_moments(mdp, v, 2)
        assert_allclose(mean, bellman_operator(mdp, v, 2), atol=1e-12)
        self.assertTrue(np.all(second >= mean**2 - 1e-12))

    def test_wrong_family_member(self):
        mdp, model, v, _ = small_problem(7)
        with self.assertRaises(ValueError):
            expected_vaml_loss(model, mdp, v, LossSpec(1, 1, 2, False, "muzero_joint"))
        with self.assertRaises(ValueError):
            expected_muzero_loss(model, mdp, v, v, LossSpec(1, 0, 2, False, "none"))


class TestSampledLossReports(unittest.TestCase):
    def test_deterministic_collapse_is_bitwise(self):
        mdp = permutation_mdp(np.arange(4.0))
        model = point_mass_model(PERMUTATION)
        v = np.array([0.5, -1.0, 2.0, 3.0])
        traj = sample_trajectory(mdp, 0, 1, np.random.default_rng(0))
        uncal = sampled_vaml_loss(model, v, LossSpec(1, 0, 4, False, "none"), traj, np.random.default_rng(1))
        cal = sampled_vaml_loss(model, v, LossSpec(1, 0, 4, True, "none"), traj, np.random.default_rng(1))
        self.assertEqual(uncal.loss_value, cal.loss_value)
        self.assertEqual(cal.loss_value, 0.0)
        assert_array_equal(uncal.model_grads.d_phi, cal.model_grads.d_phi)
        assert_array_equal(uncal.model_grads.d_psi, cal.model_grads.d_psi)

    def test_score_function_gradient_is_unbiased(self):
        for m, calibrated in ((1, False), (1, True), (2, False), (2, True)):
            mdp, model, v, _ = small_problem(10 + m)
            kernel = model.kernel()
            spec = LossSpec(m, 0, 2, calibrated, "none")
            loss_fn = cvaml_sampled if calibrated else itervaml_sampled
            env = kernel_power(mdp.transition, m)
            seqs, probs = sequence_table(kernel, 0, m)
            d_phi = np.zeros_like(model.phi)
            d_psi = np.zeros_like(model.psi)
            for i, j in itertools.product(range(len(seqs)), repeat=2):
                weight = probs[i] * probs[j]
                if weight == 0.0:
                    continue
                sequences = np.stack([seqs[i], seqs[j]])
                finals = sequences[:, -1]
                for y in range(3):
                    loss = loss_fn(v[finals], v[y])
                    g = score_function_gradients(model, 0, sequences, loss)
                    d_phi += weight * env[0, y] * g.d_phi
                    d_psi += weight * env[0, y] * g.d_psi
            exact = expected_vaml_loss(model, mdp, v, spec, states=[0]).model_grads
            self.assertLess(relative_error(d_phi, exact.d_phi), 1e-9)
            self.assertLess(relative_error(d_psi, exact.d_psi), 1e-9)

    def test_sampled_loss_requires_long_enough_trajectory(self):
        mdp, model, v, _ = small_problem(8)
        traj = Trajectory((0,), ())
        with self.assertRaises(ValueError):
            sampled_vaml_loss(model, v, LossSpec(1, 0, 2), traj, np.random.default_rng(0))


class TestMuZeroLoss(unittest.TestCase):
    def setUp(self):
        self.reward = np.array([0.3, -1.2, 0.7, 2.0])
        self.model = point_mass_model(PERMUTATION)
        self.traj = Trajectory((0, 1, 2), (0.3, -1.2))

    def test_target_reduces_to_reward_without_discount(self):
        mdp = permutation_mdp(self.reward, discount=0.0)
        v_hat = np.array([1.0, 2.0, 3.0, 4.0])
        spec = LossSpec(1, 1, 2, False, "muzero_joint", update_real_state=False)
        report = muzero_loss(self.model, mdp, v_hat, np.zeros(4), spec, self.traj, np.random.default_rng(0))
        # el modelo predice el estado 1 y el target es r(x^(1)) = −1.2
        self.assertAlmostEqual(report.loss_value, (2.0 + 1.2) ** 2, places=12)
        expected_grad = np.zeros(4)
        expected_grad[1] = 2.0 * (2.0 + 1.2)
        assert_allclose(report.value_grads, expected_grad, atol=1e-12)

    def test_target_uses_frozen_values(self):
        mdp = permutation_mdp(self.reward, discount=0.5)
        v_hat = np.array([1.0, 2.0, 3.0, 4.0])
        v_tar = np.array([0.0, 0.0, 10.0, 0.0])
        spec = LossSpec(1, 1, 2, False, "muzero_joint", update_real_state=True)
        report = muzero_loss(self.model, mdp, v_hat, v_tar, spec, self.traj, np.random.default_rng(0))
        target = -1.2 + 0.5 * 10.0
        # estado predicho y estado real coinciden (x^(1) = 1)
        self.assertAlmostEqual(report.loss_value, 2.0 * (2.0 - target) ** 2, places=12)
        self.assertAlmostEqual(report.value_grads[1], 4.0 * (2.0 - target), places=12)

    def test_perfect_model_and_values_have_zero_expected_loss(self):
        mdp = permutation_mdp(self.reward)
        v = exact_value(mdp)
        for update_real_state in (True, False):
            spec = LossSpec(1, 1, 2, False, "muzero_joint", update_real_state)
            self.assertLess(expected_muzero_loss(self.model, mdp, v, v, spec).loss_value, 1e-10)

    def test_trajectory_too_short(self):
        mdp = permutation_mdp(self.reward)
        spec = LossSpec(1, 2, 2, False, "muzero_joint")
        with self.assertRaises(ValueError):
            muzero_loss(self.model, mdp, np.zeros(4), np.zeros(4), spec, self.traj, np.random.default_rng(0))

    def _value_minimizer(self, model, mdp, v_tar, spec):
        """Punto estacionario en V̂ resolviendo el sistema lineal de su gradiente afín."""
        n = mdp.n_states

        def grad(v):
            return expected_muzero_loss(model, mdp, v, v_tar, spec).value_grads

        g0 = grad(np.zeros(n))
        a = np.column_stack([grad(np.eye(n)[i]) - g0 for i in range(n)])
        return np.linalg.solve(a, -g0)

    def test_calibration_removes_value_bias(self):
        rng = np.random.default_rng(31)
        model = init_model(3, 3, 1.0, rng)
        mdp = FiniteMdp(model.kernel(), rng.standard_normal(3), 0.9)
        v_tar = rng.standard_normal(3)
        bellman = bellman_operator(mdp, v_tar, 1)

        calibrated = self._value_minimizer(model, mdp, v_tar, LossSpec(1, 1, 2, True, "muzero_joint", False))
        assert_allclose(calibrated, bellman, atol=1e-8)

        uncalibrated = self._value_minimizer(model, mdp, v_tar, LossSpec(1, 1, 1, False, "muzero_joint", False))
        p = mdp.transition
        t_bar = p @ bellman
        expected = (p.T @ t_bar) / p.sum(axis=0)
        assert_allclose(uncalibrated, expected, atol=1e-8)
        self.assertGreater(np.max(np.abs(uncalibrated - bellman)), 1e-3)


class TestTdAndKl(unittest.TestCase):
    def test_td_examples(self):
        loss, grad = td_loss(np.zeros(3), np.zeros(3), 1, 2, 3.0, 0.0)
        self.assertEqual(loss, 9.0)
        assert_array_equal(grad, [0.0, -6.0, 0.0])
        v_tar = np.array([1.0, 2.0, 4.0])
        loss, grad = td_loss(np.array([0.0, 3.0 + 0.9 * 4.0, 0.0]), v_tar, 1, 2, 3.0, 0.9)
        self.assertAlmostEqual(loss, 0.0, places=20)

    def test_td_gradient_ignores_target(self):
        v_hat = np.array([1.0, 2.0, 3.0])
        _, grad = td_loss(v_hat, v_hat.copy(), 0, 0, 1.0, 0.9)
        self.assertEqual(np.count_nonzero(grad[1:]), 0)

    def test_expected_td_iteration_reaches_exact_value(self):
        mdp = random_mdp(np.random.default_rng(12), 6)
        v = np.zeros(6)
        v_tar = v.copy()
        for _ in range(300):
            _, grad = expected_td_loss(mdp.transition, mdp.reward, mdp.discount, v, v_tar)
            v = v - 0.5 * mdp.n_states * grad
            v_tar = v.copy()
        assert_allclose(v, exact_value(mdp), atol=1e-6)

    def test_expected_td_gradient(self):
        mdp = random_mdp(np.random.default_rng(13), 5)
        rng = np.random.default_rng(14)
        v_hat, v_tar = rng.standard_normal(5), rng.standard_normal(5)
        _, grad = expected_td_loss(mdp.transition, mdp.reward, mdp.discount, v_hat, v_tar, states=[0, 2, 2])
        numeric = numerical_gradient(
            lambda v: expected_td_loss(mdp.transition, mdp.reward, mdp.discount, v, v_tar, states=[0, 2, 2])[0], v_hat
        )
        self.assertLess(relative_error(grad, numeric), 1e-7)

    def test_kl_examples(self):
        rng = np.random.default_rng(15)
        model = init_model(4, 4, 1.0, rng)
        loss, _ = kl_loss_batch(model, model.kernel())
        self.assertEqual(loss, 0.0)
        uniform = LowRankModel(np.zeros((2, 4)), np.zeros((2, 4)))
        loss, _ = kl_loss_batch(uniform, np.eye(4))
        self.assertAlmostEqual(loss, np.log(4.0), places=12)

    def test_kl_matches_direct_sum(self):
        mdp, model, _, _ = small_problem(16)
        p, q = mdp.transition[1], model.kernel()[1]
        loss, _ = kl_loss(model, mdp, 1)
        self.assertAlmostEqual(loss, float(np.sum(p * np.log(p / q))), places=12)

    def test_kl_zero_mass_raises(self):
        with self.assertRaises(FloatingPointError):
            kl_rows(np.array([[0.5, 0.5]]), np.array([[1.0, 0.0]]))


class TestGradients(unittest.TestCase):
    def test_vaml_model_gradients(self):
        mdp, model, v, _ = small_problem(20, n=4)
        for m in (1, 2):
            for k, calibrated in ((1, False), (2, False), (4, False), (2, True), (4, True)):
                spec = LossSpec(m, 0, k, calibrated, "none")

                def loss_fn(mod):
                    report = expected_vaml_loss(mod, mdp, v, spec, states=[0, 1, 3])
                    return report.loss_value, report.model_grads

                self.assertLess(model_gradient_error(model, loss_fn), 1e-6, msg=f"m={m} k={k} cal={calibrated}")

    def test_muzero_model_and_value_gradients(self):
        mdp, model, v_hat, rng = small_problem(21, n=4)
        v_tar = rng.standard_normal(4)
        for m, b in ((1, 1), (1, 2), (2, 1)):
            for calibrated in (False, True):
                for update_real_state in (False, True):
                    spec = LossSpec(m, b, 2, calibrated, "muzero_joint", update_real_state)

                    def loss_fn(mod):
                        report = expected_muzero_loss(mod, mdp, v_hat, v_tar, spec)
                        return report.loss_value, report.model_grads

                    label = f"m={m} b={b} cal={calibrated} real={update_real_state}"
                    self.assertLess(model_gradient_error(model, loss_fn), 1e-6, msg=label)
                    analytic = expected_muzero_loss(model, mdp, v_hat, v_tar, spec).value_grads
                    numeric = numerical_gradient(
                        lambda v: expected_muzero_loss(model, mdp, v, v_tar, spec).loss_value, v_hat
                    )
                    self.assertLess(relative_error(analytic, numeric), 1e-6, msg=label)

    def test_first_step_kernel_gradients(self):
        mdp, model, v_hat, rng = small_problem(22, n=4)
        first_step = rng.dirichlet(np.ones(4), size=4)
        spec = LossSpec(1, 1, 2, True, "muzero_joint")

        def loss_fn(mod):
            report = expected_muzero_loss(mod, mdp, v_hat, v_hat, spec, first_step=first_step)
            return report.loss_value, report.model_grads

        self.assertLess(model_gradient_error(model, loss_fn), 1e-6)

    def test_kl_gradients(self):
        mdp, model, _, _ = small_problem(23, n=4)
        self.assertLess(model_gradient_error(model, lambda mod: kl_loss_batch(mod, mdp.transition)), 1e-6)


class TestLossSpec(unittest.TestCase):
    def test_invalid_members(self):
        with self.assertRaises(ValueError):
            LossSpec(m=-1)
        with self.assertRaises(ValueError):
            LossSpec(k=0)
        with self.assertRaises(ValueError):
            LossSpec(k=1, calibrated=True)
        with self.assertRaises(ValueError):
            LossSpec(b=0, value_update="muzero_joint")
        with self.assertRaises(ValueError):
            LossSpec(m=0, value_update="td_model_based")

    def test_model_free_member(self):
        spec = LossSpec(m=0, value_update="td_model_free")
        self.assertFalse(spec.updates_model)


if __name__ == "__main__":
    unittest.main()
