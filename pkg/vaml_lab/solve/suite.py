# vaml_lab/solve/suite.py
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from vaml_lab.core.mdp import FiniteMdp, bellman_operator, exact_policy_iteration, exact_value
from vaml_lab.logic.cliffwalk import GOAL, START, CliffwalkSpec, generate_cliffwalk
from vaml_lab.logic.garnet import random_mdp
from vaml_lab.losses.expected import expected_muzero_loss, expected_vaml_loss, itervaml_expectation
from vaml_lab.losses.kl import kl_loss_batch
from vaml_lab.losses.spec import LossSpec
from vaml_lab.losses.td import expected_td_loss
from vaml_lab.model.low_rank import init_model
from vaml_lab.solve.g_objective import DiscreteInstance, g_objective
from vaml_lab.solve.gradcheck import model_gradient_error, numerical_gradient, relative_error
from vaml_lab.solve.path_search import brute_force_optimal_return
from vaml_lab.solve.propositions import (
    brute_force_g_min,
    lemma_a4_descent,
    lemma_a4_loss,
    prop21_witness,
    prop23_grid_oracle,
    prop23_value_bias,
    tuple_table,
)
from vaml_lab.solve.simplex_grid import SimplexGrid

logger = logging.getLogger(__name__)

OnCheckCallback = Callable[["CheckResult"], None]

# Instancia estocástica fija de 3 estados para el sesgo del valor
BIAS_TRANSITION = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
BIAS_TARGET = np.array([0.0, 1.0, 2.0])


@dataclass(frozen=True)
class CheckResult:
    """Fila de la tabla de verificación."""

    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _moments(row: np.ndarray, v: np.ndarray):
    mean = float(row @ v)
    return mean, float(row @ v**2) - mean**2


def check_decomposition(rng: np.random.Generator, n_instances: int = 50) -> CheckResult:
    """E[IterVAML de k muestras] = itervaml_expectation + Var_modelo/k + Var_entorno."""
    worst = 0.0
    for _ in range(n_instances):
        n = int(rng.integers(2, 7))
        mdp = random_mdp(rng, n)
        v = rng.standard_normal(n)
        model = init_model(n, int(rng.integers(1, n + 1)), 1.0, rng)
        kernel = model.kernel()
        for x in range(n):
            _, var_model = _moments(kernel[x], v)
            _, var_env = _moments(mdp.transition[x], v)
            base = itervaml_expectation(model, mdp, v, 1, x)
            for k in (1, 2, 4):
                tuples, w = tuple_table(kernel[x], k)
                means = v[tuples].mean(axis=1)
                enumerated = w @ (means[:, None] - v[None, :]) ** 2 @ mdp.transition[x]
                worst = max(worst, abs(enumerated - (base + var_model / k + var_env)))
    return CheckResult("descomposicion", worst <= 1e-10, f"error max {worst:.2e}")


def check_calibration(rng: np.random.Generator, n_instances: int = 50) -> CheckResult:
    """E[CVAML] = itervaml_expectation (+ Var_entorno con el sucesor muestreado)."""
    worst = 0.0
    for _ in range(n_instances):
        n = int(rng.integers(2, 7))
        mdp = random_mdp(rng, n)
        v = rng.standard_normal(n)
        model = init_model(n, int(rng.integers(1, n + 1)), 1.0, rng)
        kernel = model.kernel()
        for x in range(n):
            env_mean, var_env = _moments(mdp.transition[x], v)
            base = itervaml_expectation(model, mdp, v, 1, x)
            for k in (2, 4):
                tuples, w = tuple_table(kernel[x], k)
                values = v[tuples]
                means = values.mean(axis=1)
                correction = values.var(axis=1) / (k - 1)
                sampled_env = w @ ((means[:, None] - v[None, :]) ** 2 - correction[:, None]) @ mdp.transition[x]
                mean_env = w @ ((means - env_mean) ** 2 - correction)
                worst = max(worst, abs(sampled_env - (base + var_env)), abs(mean_env - base))

    grid = SimplexGrid(4, 60)
    mismatches = 0
    for _ in range(10):
        instance = DiscreteInstance(rng.standard_normal(4), rng.dirichlet(np.ones(4)), 2)
        if not brute_force_g_min(instance, grid, calibrated=True).mean_matches:
            mismatches += 1
    passed = worst <= 1e-10 and mismatches == 0
    return CheckResult("calibracion", passed, f"error max {worst:.2e}, grillas sin calce {mismatches}")


def check_witness() -> CheckResult:
    """g(masa puntual) = 0.40 < g(p) = 0.48 y la brecha decae como 1/k."""
    instance = DiscreteInstance(np.array([0.0, 1.0]), np.array([0.4, 0.6]), 1)
    g_point = g_objective(instance, np.array([0.0, 1.0]))
    g_true = g_objective(instance, instance.p)
    grid_min = brute_force_g_min(instance, SimplexGrid(2, 1000))

    mdp = FiniteMdp(np.array([[0.4, 0.6], [0.4, 0.6]]), np.zeros(2), 0.9)
    v = np.array([0.0, 1.0])
    gaps = [prop21_witness(mdp, v, k).gap for k in (1, 2, 4, 8)]
    tail_k = np.array([8, 16, 32, 64])
    tail = np.array([prop21_witness(mdp, v, int(k)).gap for k in tail_k])
    slope = float(np.polyfit(np.log(tail_k), np.log(tail), 1)[0])

    passed = (
        abs(g_point - 0.40) <= 1e-12
        and abs(g_true - 0.48) <= 1e-12
        and not grid_min.mean_matches
        and all(a >= b for a, b in zip(gaps, gaps[1:]))
        and abs(slope + 1.0) <= 0.15
    )
    detail = f"g(punto)={g_point:.4f} g(p)={g_true:.4f} media grilla={grid_min.mean:.3f} pendiente={slope:.3f}"
    return CheckResult("testigo", passed, detail)


def check_value_bias(rng: np.random.Generator, n_instances: int = 100) -> CheckResult:
    """Derivada analítica vs diferencias finitas y sesgo del sustituto MuZero."""
    worst_fd = 0.0
    eps = 1e-5
    for _ in range(n_instances):
        n = int(rng.integers(2, 9))
        g = rng.standard_normal(n)
        mu = rng.dirichlet(np.ones(n))
        fd = (lemma_a4_loss(g - eps * g, g, mu) - lemma_a4_loss(g + eps * g, g, mu)) / (2.0 * eps)
        worst_fd = max(worst_fd, abs(fd - lemma_a4_descent(g, mu)))

    worst_trivial = 0.0
    for _ in range(10):
        n = int(rng.integers(3, 9))
        perm = np.eye(n)[rng.permutation(n)]
        det = FiniteMdp(perm, rng.standard_normal(n), 0.9)
        worst_trivial = max(worst_trivial, prop23_value_bias(det, rng.standard_normal(n)).bias_norm)
        stochastic = random_mdp(rng, n)
        worst_trivial = max(worst_trivial, prop23_value_bias(stochastic, np.full(n, 1.7)).bias_norm)

    mdp = FiniteMdp(BIAS_TRANSITION, np.zeros(3), 0.9)
    report = prop23_value_bias(mdp, BIAS_TARGET)
    oracle = prop23_grid_oracle(mdp, BIAS_TARGET)
    oracle_gap = float(np.max(np.abs(oracle - report.surrogate_minimizer)))

    passed = worst_fd <= 1e-6 and worst_trivial <= 1e-10 and report.bias_norm > 1e-3 and oracle_gap <= 1e-3
    detail = (
        f"dif. finitas {worst_fd:.2e}, trivial {worst_trivial:.2e}, "
        f"sesgo {report.bias_norm:.4f}, oraculo {oracle_gap:.2e}"
    )
    return CheckResult("sesgo_valor", passed, detail)


def check_gradients(rng: np.random.Generator, n_instances: int = 20, tolerance: float = 1e-4) -> CheckResult:
    """Gradientes analíticos de cada pérdida vs diferencias centrales."""
    worst = {"vaml": 0.0, "cvaml": 0.0, "muzero_modelo": 0.0, "muzero_valor": 0.0, "kl": 0.0, "td": 0.0}
    for _ in range(n_instances):
        n = int(rng.integers(2, 9))
        rank = int(rng.integers(1, min(4, n) + 1))
        mdp = random_mdp(rng, n)
        model = init_model(n, rank, 0.5, rng)
        v = rng.standard_normal(n)
        v_tar = rng.standard_normal(n)

        for key, calibrated in (("vaml", False), ("cvaml", True)):
            spec = LossSpec(m=1, b=0, k=2, calibrated=calibrated)
            fn = lambda mod, spec=spec: _pair(expected_vaml_loss(mod, mdp, v, spec))
            worst[key] = max(worst[key], model_gradient_error(model, fn))

        mz = LossSpec(m=1, b=1, k=2, calibrated=bool(rng.integers(2)), value_update="muzero_joint")
        worst["muzero_modelo"] = max(
            worst["muzero_modelo"],
            model_gradient_error(model, lambda mod: _pair(expected_muzero_loss(mod, mdp, v, v_tar, mz))),
        )
        analytic = expected_muzero_loss(model, mdp, v, v_tar, mz).value_grads
        numeric = numerical_gradient(lambda vh: expected_muzero_loss(model, mdp, vh, v_tar, mz).loss_value, v)
        worst["muzero_valor"] = max(worst["muzero_valor"], relative_error(analytic, numeric))

        worst["kl"] = max(worst["kl"], model_gradient_error(model, lambda mod: kl_loss_batch(mod, mdp.transition)))

        kernel = model.kernel()
        _, td_grad = expected_td_loss(kernel, mdp.reward, mdp.discount, v, v_tar)
        td_num = numerical_gradient(lambda vh: expected_td_loss(kernel, mdp.reward, mdp.discount, vh, v_tar)[0], v)
        worst["td"] = max(worst["td"], relative_error(td_grad, td_num))

    passed = all(err <= tolerance for err in worst.values())
    detail = ", ".join(f"{k} {err:.1e}" for k, err in worst.items())
    return CheckResult("gradientes", passed, detail)


def _pair(report):
    return report.loss_value, report.model_grads


def check_oracles(rng: np.random.Generator, n_instances: int = 100) -> CheckResult:
    """Residuo de Bellman de exact_value e iteración de políticas vs búsqueda exhaustiva."""
    worst = 0.0
    for _ in range(n_instances):
        mdp = random_mdp(rng, int(rng.integers(2, 21)), discount=float(rng.uniform(0.0, 0.99)))
        v = exact_value(mdp)
        worst = max(worst, float(np.max(np.abs(v - bellman_operator(mdp, v, 1)))))

    cmdp = generate_cliffwalk(CliffwalkSpec(move_prob=1.0))
    _, v_pi, _ = exact_policy_iteration(cmdp)
    best = brute_force_optimal_return(cmdp, START, GOAL, max_depth=12)
    brute = best.discounted_return if best is not None else float("nan")
    gap = abs(float(v_pi[START]) - brute)
    passed = worst <= 1e-10 and gap <= 1e-10
    return CheckResult("oraculos", passed, f"residuo {worst:.2e}, PI {v_pi[START]:.6f} vs exhaustivo {brute:.6f}")


def run_verification_suite(seed: int = 0, on_check: Optional[OnCheckCallback] = None) -> List[CheckResult]:
    """Corre todas las verificaciones numéricas y devuelve una fila por chequeo.

    Una excepción dentro de un chequeo lo marca como fallido sin detener el resto.

    Args:
        seed: Semilla de las instancias aleatorias.
        on_check: Callback opcional llamado con cada resultado apenas termina.

    Returns:
        Lista de CheckResult en orden fijo.
    """
    rng = np.random.default_rng(seed)
    checks = [
        ("descomposicion", lambda: check_decomposition(rng)),
        ("calibracion", lambda: check_calibration(rng)),
        ("testigo", check_witness),
        ("sesgo_valor", lambda: check_value_bias(rng)),
        ("gradientes", lambda: check_gradients(rng)),
        ("oraculos", lambda: check_oracles(rng)),
    ]
    results: List[CheckResult] = []
    for name, run in checks:
        t0 = time.perf_counter()
        try:
            result = run()
        except Exception as exc:
            logger.exception("Chequeo %s falló con excepción", name)
            result = CheckResult(name, False, f"{type(exc).__name__}: {exc}")
        result = CheckResult(result.name, result.passed, result.detail, time.perf_counter() - t0)
        logger.info("%s: %s (%s)", name, "OK" if result.passed else "FALLA", result.detail)
        results.append(result)
        if on_check is not None:
            on_check(result)
    return results
