# vaml_lab/losses/spec.py
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Literal, Optional

import numpy as np

from vaml_lab.model.low_rank import Gradients

ValueUpdate = Literal["none", "td_model_based", "td_model_free", "muzero_joint"]
VALUE_UPDATES = ("none", "td_model_based", "td_model_free", "muzero_joint")


@dataclass(frozen=True)
class LossSpec:
    """Miembro de la familia (m,b)-VAML.

    Attributes:
        m: Pasos de rollout del modelo (0 = TD libre de modelo).
        b: Pasos del operador de Bellman del target (0 = IterVAML).
        k: Muestras del modelo por estado.
        calibrated: Resta la corrección de varianza (CVAML).
        value_update: Cómo se entrena la tabla de valores.
        update_real_state: En `muzero_joint`, también ajusta V̂ en el estado real x^(m).
    """

    m: int = 1
    b: int = 0
    k: int = 2
    calibrated: bool = False
    value_update: ValueUpdate = "td_model_based"
    update_real_state: bool = True

    def __post_init__(self) -> None:
        if self.m < 0 or self.b < 0:
            raise ValueError(f"m y b deben ser >= 0 (m={self.m}, b={self.b})")
        if self.k < 1:
            raise ValueError(f"k debe ser >= 1: {self.k}")
        if self.value_update not in VALUE_UPDATES:
            raise ValueError(f"value_update no soportado: {self.value_update}")
        if self.calibrated and self.k < 2:
            raise ValueError("La corrección calibrada requiere k >= 2")
        if self.b == 0 and self.value_update == "muzero_joint":
            raise ValueError("Con b = 0 la pérdida no puede actualizar la función de valor")
        if self.m == 0 and self.value_update not in ("td_model_free", "none"):
            raise ValueError("Con m = 0 no hay modelo: use value_update='td_model_free'")

    @property
    def updates_model(self) -> bool:
        return self.m >= 1


@dataclass
class LossReport:
    """Resultado de evaluar una pérdida: valor, gradientes y diagnósticos."""

    loss_value: float
    model_grads: Optional[Gradients] = None
    value_grads: Optional[np.ndarray] = None
    diagnostics: Dict[str, np.ndarray] = field(default_factory=dict)

    def is_finite(self) -> bool:
        ok = bool(np.isfinite(self.loss_value))
        if self.model_grads is not None:
            ok = ok and self.model_grads.is_finite()
        if self.value_grads is not None:
            ok = ok and bool(np.all(np.isfinite(self.value_grads)))
        return ok
