# vaml_lab/solve/simplex_grid.py
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Iterator

import numpy as np

MAX_SUPPORT_SIZE: int = 6
MAX_GRID_POINTS: int = 2_000_000


@dataclass(frozen=True)
class SimplexGrid:
    """Todas las distribuciones sobre `support_size` puntos con probabilidades múltiplos de 1/R.

    El orden de los puntos es lexicográfico sobre las posiciones de las barras
    (stars and bars), y define el índice usado para desempatar. Los puntos se
    generan por bloques; la grilla completa nunca se materializa.

    Raises:
        ValueError: Con soporte mayor a MAX_SUPPORT_SIZE o más de
            MAX_GRID_POINTS puntos, antes de enumerar nada.
    """

    support_size: int
    resolution: int

    def __post_init__(self) -> None:
        if self.support_size < 1 or self.resolution < 1:
            raise ValueError(f"Grilla inválida: soporte {self.support_size}, resolución {self.resolution}")
        if self.support_size > MAX_SUPPORT_SIZE:
            raise ValueError(f"Soporte {self.support_size} mayor que el máximo {MAX_SUPPORT_SIZE}")
        if len(self) > MAX_GRID_POINTS:
            raise ValueError(
                f"Grilla de {len(self)} puntos (soporte {self.support_size}, R={self.resolution}) "
                f"supera el máximo {MAX_GRID_POINTS}"
            )

    def __len__(self) -> int:
        return comb(self.resolution + self.support_size - 1, self.support_size - 1)

    def _compositions(self) -> Iterator[tuple]:
        n, r = self.support_size, self.resolution
        for bars in itertools.combinations(range(r + n - 1), n - 1):
            prev = -1
            parts = []
            for bar in bars:
                parts.append(bar - prev - 1)
                prev = bar
            parts.append(r + n - 2 - prev)
            yield tuple(parts)

    def chunks(self, size: int = 4096) -> Iterator[tuple]:
        """(índice inicial, bloque de puntos) en orden."""
        if size < 1:
            raise ValueError(f"Tamaño de bloque inválido: {size}")
        compositions = self._compositions()
        start = 0
        while True:
            counts = list(itertools.islice(compositions, size))
            if not counts:
                return
            yield start, np.array(counts, dtype=float).reshape(-1, self.support_size) / self.resolution
            start += len(counts)
