# vaml_lab/losses/sampled.py
from __future__ import annotations

import numpy as np

from vaml_lab.core.mdp import FiniteMdp, Trajectory
from vaml_lab.losses.spec import LossReport, LossSpec
from vaml_lab.model.low_rank import LowRankModel, logits_vjp, sample_model, score_function_logits


def itervaml_sampled(model_values: np.ndarray, env_value: float) -> float:
    """(μ̂ − V(x^(m)))² con μ̂ la media de los k valores del modelo."""
    model_values = np.asarray(model_values, dtype=float)
    if model_values.size < 1:
        raise ValueError("Se necesita al menos una muestra del modelo")
    return float((model_values.mean() - env_value) ** 2)


def variance_estimate(model_values: np.ndarray) -> float:
    """Varianza muestral normalizada por 1/k (sesgada).

    Raises:
        ValueError: Si hay menos de dos muestras.
    """
    model_values = np.asarray(model_values, dtype=float)
    if model_values.size < 2:
        raise ValueError(f"La varianza requiere k >= 2 muestras (k={model_values.size})")
    return float(np.var(model_values))


def variance_correction(model_values: np.ndarray) -> float:
    """Estimador insesgado de Var[μ̂]: variance_estimate / (k − 1)."""
    k = np.asarray(model_values).size
    return variance_estimate(model_values) / (k - 1)


def cvaml_sampled(model_values: np.ndarray, env_value: float) -> float:
    """IterVAML muestral menos la corrección de varianza (puede ser negativa)."""
    return itervaml_sampled(model_values, env_value) - variance_correction(model_values)


def _model_side(model: LowRankModel, start: int, spec: LossSpec, rng: np.random.Generator):
    sequences = sample_model(model, start, spec.m, spec.k, rng)
    return sequences, sequences[:, -1]


def score_function_gradients(model: LowRankModel, start: int, sequences: np.ndarray, weight: float):
    """weight · Σ_i ∇ log p̂(secuencia_i | start), propagado a (φ, ψ)."""
    kernel = model.kernel()
    d_logits = np.zeros_like(kernel)
    for seq in sequences:
        d_logits += score_function_logits(kernel, start, seq)
    return logits_vjp(model, weight * d_logits)


def sampled_vaml_loss(
    model: LowRankModel,
    v: np.ndarray,
    spec: LossSpec,
    trajectory: Trajectory,
    rng: np.random.Generator,
) -> LossReport:
    """(m,0)-VAML con k muestras y gradiente de función de puntuación (REINFORCE).

    Args:
        model: Modelo aprendido.
        v: Función de valor (constante para el gradiente).
        spec: Debe tener b = 0 y m >= 1.
        trajectory: Rollout del entorno de largo >= m desde x^(0).
        rng: Flujo para las muestras del modelo.

    Returns:
        LossReport con `model_grads` insesgado para ∇E[pérdida].
    """
    if spec.m < 1 or spec.b != 0:
        raise ValueError(f"sampled_vaml_loss requiere m >= 1 y b = 0 (m={spec.m}, b={spec.b})")
    if trajectory.length < spec.m:
        raise ValueError(f"Trayectoria de largo {trajectory.length} < m = {spec.m}")
    start = trajectory.states[0]
    sequences, finals = _model_side(model, start, spec, rng)
    values = v[finals]
    env_value = float(v[trajectory.states[spec.m]])
    if spec.calibrated:
        loss = cvaml_sampled(values, env_value)
    else:
        loss = itervaml_sampled(values, env_value)
    diagnostics = {"model_variance": np.array([np.var(values)])}
    return LossReport(loss, score_function_gradients(model, start, sequences, loss), None, diagnostics)


def muzero_loss(
    model: LowRankModel,
    mdp: FiniteMdp,
    v_hat: np.ndarray,
    v_tar: np.ndarray,
    spec: LossSpec,
    trajectory: Trajectory,
    rng: np.random.Generator,
) -> LossReport:
    """(m,b)-VAML estilo MuZero sobre una trayectoria real y k muestras del modelo.

    El target Σ_{n<b} γⁿ r^(m+n) + γᵇ V_tar(x^(m+b)) sale del entorno y es
    constante (stop-gradient). El lado del modelo es la media de V̂(x̂_i^(m)).

    Raises:
        ValueError: Si la trayectoria es más corta que m + b o m, b < 1.
    """
    m, b = spec.m, spec.b
    if m < 1 or b < 1:
        raise ValueError(f"muzero_loss requiere m >= 1 y b >= 1 (m={m}, b={b})")
    if trajectory.length < m + b:
        raise ValueError(f"Trayectoria de largo {trajectory.length} < m + b = {m + b}")

    gamma = mdp.discount
    rewards = trajectory.rewards
    target = sum(gamma**n * rewards[m + n] for n in range(b))
    target += gamma**b * float(v_tar[trajectory.states[m + b]])

    start = trajectory.states[0]
    sequences, finals = _model_side(model, start, spec, rng)
    values = v_hat[finals]
    mean = float(values.mean())
    k = spec.k
    model_loss = (mean - target) ** 2
    if spec.calibrated:
        model_loss -= variance_correction(values)

    value_grads = None
    loss = model_loss
    if spec.value_update == "muzero_joint":
        value_grads = np.zeros_like(v_hat, dtype=float)
        np.add.at(value_grads, finals, 2.0 * (mean - target) / k)
        if spec.calibrated:
            np.add.at(value_grads, finals, -2.0 * (values - mean) / (k * (k - 1)))
        if spec.update_real_state:
            real = trajectory.states[m]
            loss += (float(v_hat[real]) - target) ** 2
            value_grads[real] += 2.0 * (float(v_hat[real]) - target)

    diagnostics = {"model_variance": np.array([np.var(values)])}
    return LossReport(loss, score_function_gradients(model, start, sequences, model_loss), value_grads, diagnostics)
