# vaml_lab/app/config.py
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Tuple, Type, TypeVar

import yaml

from vaml_lab.logic.cliffwalk import GRID_SIZE, CliffwalkSpec
from vaml_lab.logic.garnet import GarnetSpec
from vaml_lab.losses.spec import LossSpec

ModelLoss = Literal["kl", "vaml"]
Estimator = Literal["exact", "sampled"]

T = TypeVar("T")


class ConfigError(ValueError):
    """Archivo de configuración inválido (incluye ruta y clave con puntos)."""


@dataclass(frozen=True)
class TrainingConfig:
    """Presupuesto y constantes del optimizador.

    `steps` es el número de pasos por celda Garnet, o por iteración de
    mejora en la iteración de políticas.
    """

    steps: int = 5000
    learning_rate: float = 1e-2
    value_learning_rate: float = 1e-1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    init_scale: float = 1e-3
    target_update_period: int = 100
    estimator: Estimator = "exact"

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise ValueError(f"steps debe ser >= 0: {self.steps}")
        if self.learning_rate <= 0.0 or self.value_learning_rate <= 0.0:
            raise ValueError("Las tasas de aprendizaje deben ser > 0")
        if self.target_update_period < 1:
            raise ValueError(f"target_update_period debe ser >= 1: {self.target_update_period}")
        if self.init_scale <= 0.0:
            raise ValueError(f"init_scale debe ser > 0: {self.init_scale}")
        if self.estimator not in ("exact", "sampled"):
            raise ValueError(f"Estimador no soportado: {self.estimator}")


@dataclass(frozen=True)
class AlgorithmSpec:
    """Algoritmo de la grilla: etiqueta, pérdida del modelo y miembro de la familia."""

    label: str
    loss: LossSpec
    model_loss: ModelLoss = "vaml"

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("El algoritmo necesita una etiqueta")
        if self.model_loss not in ("kl", "vaml"):
            raise ValueError(f"Pérdida de modelo no soportada: {self.model_loss}")


ROSTER: Dict[str, AlgorithmSpec] = {
    "kl+td": AlgorithmSpec("kl+td", LossSpec(1, 0, 1, False, "td_model_based"), "kl"),
    "vaml10+td": AlgorithmSpec("vaml10+td", LossSpec(1, 0, 2, False, "td_model_based")),
    "cvaml10+td": AlgorithmSpec("cvaml10+td", LossSpec(1, 0, 2, True, "td_model_based")),
    "vaml11": AlgorithmSpec("vaml11", LossSpec(1, 1, 2, False, "muzero_joint")),
    "cvaml11": AlgorithmSpec("cvaml11", LossSpec(1, 1, 2, True, "muzero_joint")),
}


@dataclass(frozen=True)
class SweepConfig:
    """Barrido Garnet: τ × rango × algoritmo × problema."""

    garnet: GarnetSpec = field(default_factory=GarnetSpec)
    temperature_grid: Tuple[float, ...] = (0.1, 1.0)
    rank_grid: Tuple[int, ...] = (10, 25)
    algorithms: Tuple[AlgorithmSpec, ...] = tuple(ROSTER.values())
    n_problems: int = 100
    training: TrainingConfig = field(default_factory=TrainingConfig)
    master_seed: int = 0

    def __post_init__(self) -> None:
        _check_grids(self.temperature_grid, self.rank_grid, self.algorithms, self.n_problems)
        if max(self.rank_grid) > self.garnet.n_states:
            raise ValueError(f"Rango {max(self.rank_grid)} mayor que n = {self.garnet.n_states}")


@dataclass(frozen=True)
class PiConfig:
    """Iteración de políticas en el cliffwalk: move_prob × rango × algoritmo × semilla."""

    cliffwalk: CliffwalkSpec = field(default_factory=CliffwalkSpec)
    move_prob_grid: Tuple[float, ...] = (0.33, 0.66, 0.99)
    rank_grid: Tuple[int, ...] = (2, 5, 10, 25)
    algorithms: Tuple[AlgorithmSpec, ...] = tuple(ROSTER.values())
    n_iterations: int = 10
    n_problems: int = 100
    training: TrainingConfig = field(default_factory=lambda: TrainingConfig(steps=500))
    master_seed: int = 0

    def __post_init__(self) -> None:
        _check_grids(self.move_prob_grid, self.rank_grid, self.algorithms, self.n_problems)
        if self.n_iterations < 1:
            raise ValueError(f"n_iterations debe ser >= 1: {self.n_iterations}")
        if max(self.rank_grid) > GRID_SIZE * GRID_SIZE:
            raise ValueError(f"Rango {max(self.rank_grid)} mayor que n = {GRID_SIZE * GRID_SIZE}")
        if any(not (0.0 < p <= 1.0) for p in self.move_prob_grid):
            raise ValueError(f"move_prob fuera de (0, 1] en la grilla: {self.move_prob_grid}")
        for algorithm in self.algorithms:
            if algorithm.loss.m != 1:
                raise ValueError(f"El control solo admite m = 1 ({algorithm.label})")


def _check_grids(outer: Tuple[float, ...], ranks: Tuple[int, ...], algorithms, n_problems: int) -> None:
    if not outer or not ranks or not algorithms:
        raise ValueError("Las grillas no pueden estar vacías")
    if min(ranks) < 1:
        raise ValueError(f"Rango inválido en la grilla: {min(ranks)}")
    if n_problems < 2:
        raise ValueError(f"n_problems debe ser >= 2 para el bootstrap: {n_problems}")
    labels = [a.label for a in algorithms]
    if len(set(labels)) != len(labels):
        raise ValueError(f"Etiquetas de algoritmo repetidas: {labels}")


# --------------------------
# Carga desde YAML
# --------------------------
def _build(cls: Type[T], data: Any, path: Path, key: str, exclude: Tuple[str, ...] = ()) -> T:
    """Construye un dataclass desde un mapeo, rechazando claves desconocidas."""
    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        raise ConfigError(f"{path}: '{key}' debe ser un mapeo")
    allowed = {f.name for f in fields(cls)} - set(exclude)
    for name in data:
        if name not in allowed:
            raise ConfigError(f"{path}: clave desconocida '{key}.{name}'")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: '{key}' inválido: {exc}") from exc


def parse_algorithm(item: Any, path: Path, key: str) -> AlgorithmSpec:
    """Etiqueta del roster o mapeo {label, m, b, k, calibrated, value_update, model_loss}."""
    if isinstance(item, str):
        if item not in ROSTER:
            raise ConfigError(f"{path}: algoritmo desconocido '{item}' en '{key}' (roster: {', '.join(ROSTER)})")
        return ROSTER[item]
    if not isinstance(item, Mapping):
        raise ConfigError(f"{path}: '{key}' debe ser una etiqueta o un mapeo")
    data = dict(item)
    allowed = {"label", "model_loss"} | {f.name for f in fields(LossSpec)}
    for name in data:
        if name not in allowed:
            raise ConfigError(f"{path}: clave desconocida '{key}.{name}'")
    label = data.pop("label", None)
    model_loss = data.pop("model_loss", "vaml")
    loss = _build(LossSpec, data, path, key)
    try:
        return AlgorithmSpec(str(label or ""), loss, model_loss)
    except ValueError as exc:
        raise ConfigError(f"{path}: '{key}' inválido: {exc}") from exc


def _algorithms(raw: Any, path: Path) -> Tuple[AlgorithmSpec, ...]:
    if raw is None:
        return tuple(ROSTER.values())
    if not isinstance(raw, list):
        raise ConfigError(f"{path}: 'algorithms' debe ser una lista")
    return tuple(parse_algorithm(item, path, f"algorithms.{i}") for i, item in enumerate(raw))


def _grid(raw: Any, path: Path, key: str, cast) -> Tuple:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{path}: '{key}' debe ser una lista no vacía")
    try:
        return tuple(cast(x) for x in raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: '{key}' contiene un valor inválido: {exc}") from exc


def load_yaml(path: Path) -> Dict[str, Any]:
    """Lee un YAML y exige un mapeo en la raíz.

    Raises:
        ConfigError: Si el archivo no existe, no es YAML válido o no es un mapeo.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except OSError as exc:
        raise ConfigError(f"{path}: no se pudo leer ({exc.strerror})") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: YAML inválido: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: la raíz debe ser un mapeo")
    return data


def _top_level(data: Dict[str, Any], cls: Type, path: Path) -> None:
    allowed = {f.name for f in fields(cls)}
    for name in data:
        if name not in allowed:
            raise ConfigError(f"{path}: clave desconocida '{name}'")


def load_sweep_config(path: str | Path) -> SweepConfig:
    """Carga un SweepConfig. La plantilla `garnet` no admite `temperature` ni `seed`
    (los fija cada celda)."""
    path = Path(path)
    data = load_yaml(path)
    _top_level(data, SweepConfig, path)
    kwargs: Dict[str, Any] = {}
    if "garnet" in data:
        kwargs["garnet"] = _build(GarnetSpec, data["garnet"], path, "garnet", exclude=("temperature", "seed"))
    if "temperature_grid" in data:
        kwargs["temperature_grid"] = _grid(data["temperature_grid"], path, "temperature_grid", float)
    if "rank_grid" in data:
        kwargs["rank_grid"] = _grid(data["rank_grid"], path, "rank_grid", int)
    if "algorithms" in data:
        kwargs["algorithms"] = _algorithms(data["algorithms"], path)
    if "training" in data:
        kwargs["training"] = _build(TrainingConfig, data["training"], path, "training")
    for name in ("n_problems", "master_seed"):
        if name in data:
            kwargs[name] = int(data[name])
    try:
        return SweepConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_pi_config(path: str | Path) -> PiConfig:
    """Carga un PiConfig. La plantilla `cliffwalk` solo fija el descuento
    (move_prob sale de la grilla)."""
    path = Path(path)
    data = load_yaml(path)
    _top_level(data, PiConfig, path)
    kwargs: Dict[str, Any] = {}
    if "cliffwalk" in data:
        kwargs["cliffwalk"] = _build(CliffwalkSpec, data["cliffwalk"], path, "cliffwalk", exclude=("move_prob",))
    if "move_prob_grid" in data:
        kwargs["move_prob_grid"] = _grid(data["move_prob_grid"], path, "move_prob_grid", float)
    if "rank_grid" in data:
        kwargs["rank_grid"] = _grid(data["rank_grid"], path, "rank_grid", int)
    if "algorithms" in data:
        kwargs["algorithms"] = _algorithms(data["algorithms"], path)
    if "training" in data:
        kwargs["training"] = _build(TrainingConfig, data["training"], path, "training")
    for name in ("n_iterations", "n_problems", "master_seed"):
        if name in data:
            kwargs[name] = int(data[name])
    try:
        return PiConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def with_seed(config: T, master_seed: int | None) -> T:
    """Copia con `master_seed` reemplazada (override de la CLI)."""
    if master_seed is None:
        return config
    return replace(config, master_seed=int(master_seed))
