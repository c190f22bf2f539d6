# vaml_lab/app/policy_iteration.py
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

from vaml_lab.app.config import AlgorithmSpec, PiConfig, TrainingConfig
from vaml_lab.app.garnet_cell import TRAINING_FAILURES, ExperimentRecord, make_optimizer, derive_problem_seed
from vaml_lab.core.mdp import (
    ControlMdp,
    ValueTable,
    greedy_policy,
    induce_policy_kernel,
    policy_evaluation,
    uniform_policy,
)
from vaml_lab.logic.cliffwalk import START, generate_cliffwalk
from vaml_lab.losses.expected import expected_family_loss
from vaml_lab.losses.kl import kl_loss_batch
from vaml_lab.losses.td import expected_td_loss
from vaml_lab.model.low_rank import Gradients, LowRankModel, init_model
from vaml_lab.model.optimizer import DivergenceError, OptimizerState, adam_update, optimizer_step

logger = logging.getLogger(__name__)


@dataclass
class ActionModels:
    """Un modelo de rango j por acción: P̂_a(x'|x)."""

    models: List[LowRankModel]
    optimizers: List[OptimizerState]

    @classmethod
    def create(cls, cmdp: ControlMdp, rank: int, training: TrainingConfig, rng: np.random.Generator) -> "ActionModels":
        models = [init_model(cmdp.n_states, rank, training.init_scale, rng) for _ in range(cmdp.n_actions)]
        return cls(models, [make_optimizer(training, training.learning_rate) for _ in models])

    def kernels(self) -> np.ndarray:
        """Tensor (acción, x, x') del modelo."""
        return np.stack([m.kernel() for m in self.models])

    def policy_kernel(self, policy: np.ndarray) -> np.ndarray:
        """Σ_a π(a|x) P̂_a(·|x)."""
        return np.einsum("xa,axy->xy", policy, self.kernels())

    def apply(self, grads: List[Gradients]) -> None:
        for a, g in enumerate(grads):
            self.models[a], self.optimizers[a] = optimizer_step(self.models[a], g, self.optimizers[a])


def lookahead_q(cmdp: ControlMdp, models: ActionModels, v_hat: np.ndarray) -> np.ndarray:
    """Q(x, a) = r(x) + γ (P̂_a V̂)(x) con la recompensa verdadera."""
    cont = np.einsum("axy,y->xa", models.kernels(), v_hat)
    return cmdp.reward[:, None] + cmdp.discount * cont


def control_step(
    cmdp: ControlMdp,
    policy: np.ndarray,
    models: ActionModels,
    values: ValueTable,
    value_opt: OptimizerState,
    algorithm: AlgorithmSpec,
) -> OptimizerState:
    """Un paso de entrenamiento del modelo de cada acción y de V̂ bajo `policy`.

    Las pérdidas del modelo cubren todos los pares (x, a); los targets de valor
    siguen la política actual.
    """
    spec = algorithm.loss
    env = induce_policy_kernel(cmdp, policy)
    v_hat, v_tar = values.values, values.target_values
    grads: List[Gradients] = []
    value_grads: Optional[np.ndarray] = None

    for a, model in enumerate(models.models):
        if algorithm.model_loss == "kl":
            loss, g = kl_loss_batch(model, cmdp.transition[a])
        else:
            target = v_hat if spec.b == 0 else v_tar
            report = expected_family_loss(model, env, v_hat, target, spec, first_step=cmdp.transition[a])
            if not report.is_finite():
                raise DivergenceError(f"Pérdida no finita en la acción {a}")
            loss, g = report.loss_value, report.model_grads
            if report.value_grads is not None:
                share = report.value_grads / cmdp.n_actions
                value_grads = share if value_grads is None else value_grads + share
        if not math.isfinite(loss):
            raise DivergenceError(f"Pérdida no finita en la acción {a}")
        grads.append(g)

    if spec.value_update == "td_model_based":
        td, value_grads = expected_td_loss(models.policy_kernel(policy), cmdp.reward, cmdp.discount, v_hat, v_tar)
        if not math.isfinite(td):
            raise DivergenceError("Pérdida TD no finita")

    models.apply(grads)
    if value_grads is not None:
        params, value_opt = adam_update({"values": v_hat}, {"values": value_grads}, value_opt)
        values.values = params["values"]
    return value_opt


def improve_policy(
    cmdp: ControlMdp,
    policy: np.ndarray,
    models: ActionModels,
    values: ValueTable,
    algorithm: AlgorithmSpec,
    training: TrainingConfig,
) -> np.ndarray:
    """Estima el valor de `policy` con el modelo y devuelve la política greedy.

    Los modelos y V̂ se reutilizan entre iteraciones; el optimizador de V̂ se
    reinicia en cada fase de evaluación.
    """
    value_opt = make_optimizer(training, training.value_learning_rate)
    for step in range(1, training.steps + 1):
        value_opt = control_step(cmdp, policy, models, values, value_opt, algorithm)
        if step % training.target_update_period == 0:
            values.refresh_target()
    values.refresh_target()
    return greedy_policy(lookahead_q(cmdp, models, values.values))


def run_policy_iteration(
    config: PiConfig, move_prob: float, rank: int, algorithm: AlgorithmSpec, problem_index: int
) -> ExperimentRecord:
    """Iteración de políticas con modelo aprendido en el cliffwalk.

    Alterna (a) entrenamiento del modelo y de V̂ bajo la política actual y
    (b) mejora greedy con la predicción a un paso del modelo. Tras cada
    iteración se evalúa la política exactamente sobre el MDP verdadero.

    Returns:
        ExperimentRecord con `returns` de largo n_iterations + 1; el primer valor
        es el retorno exacto de la política uniforme. Si el entrenamiento diverge
        se conserva la curva parcial y `failed=True`.
    """
    t0 = time.perf_counter()
    problem_seed = derive_problem_seed(config.master_seed, problem_index)
    record = ExperimentRecord(problem_seed, float(move_prob), int(rank), algorithm.label, steps=config.training.steps)
    cmdp = generate_cliffwalk(replace(config.cliffwalk, move_prob=float(move_prob)))
    rng = np.random.default_rng([problem_seed, 3])
    policy = uniform_policy(cmdp)
    returns = [float(policy_evaluation(cmdp, policy)[START])]
    try:
        models = ActionModels.create(cmdp, rank, config.training, rng)
        values = ValueTable.zeros(cmdp.n_states)
        for _ in range(config.n_iterations):
            policy = improve_policy(cmdp, policy, models, values, algorithm, config.training)
            returns.append(float(policy_evaluation(cmdp, policy)[START]))
    except TRAINING_FAILURES as exc:
        record.failed = True
        record.error = f"{type(exc).__name__}: {exc}"
        logger.warning(
            "Iteración de políticas fallida: semilla %d, move_prob=%g, rango %d, %s: %s",
            problem_seed, move_prob, rank, algorithm.label, exc,
        )
    record.returns = tuple(returns)
    record.wall_time = time.perf_counter() - t0
    return record
