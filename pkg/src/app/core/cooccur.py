"""
Matrices de co-ocurrencia de niveles de gris (GLCM) en n dimensiones.

Una dirección es un patrón en {-1, 0, +1}^n; con la distancia k el
desplazamiento real es k * patrón, de modo que cada componente vale 0, k o -k.
"""
import io
import itertools
import json
import logging
import math
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, computed_field, field_validator

from app.core.ndgrid import NdImage
from app.utils.exceptions import DomainError, EmptyMatrixError, ShapeError

logger = logging.getLogger(__name__)

# Tolerancia de la suma de una matriz normalizada
PROB_SUM_TOL = 1e-12


class DirectionPattern(BaseModel):
    """Patrón unitario de desplazamiento (d1, ..., dn) con di en {-1, 0, +1}."""
    model_config = ConfigDict(frozen=True)

    components: Tuple[int, ...]

    @field_validator("components", mode="before")
    @classmethod
    def _check_components(cls, value):
        components = tuple(int(c) for c in value)
        if not components:
            raise ShapeError("Un patrón de dirección necesita al menos un componente")
        if any(c not in (-1, 0, 1) for c in components):
            raise DomainError(f"Componentes fuera de {{-1, 0, +1}}: {components}")
        if not any(components):
            raise DomainError("El patrón nulo no es una dirección")
        return components

    @property
    def ndim(self) -> int:
        return len(self.components)

    @property
    def is_canonical(self) -> bool:
        first = next(c for c in self.components if c != 0)
        return first == 1

    @property
    def label(self) -> str:
        return ",".join(str(c) for c in self.components)

    def __neg__(self) -> "DirectionPattern":
        return DirectionPattern(components=tuple(-c for c in self.components))

    def canonical(self) -> "DirectionPattern":
        return self if self.is_canonical else -self


class CoMatrix(BaseModel):
    """Conteos G_d de pares (i, j): matriz N_g x N_g de enteros no negativos."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    counts: np.ndarray

    @field_validator("counts", mode="before")
    @classmethod
    def _check_counts(cls, value):
        counts = np.asarray(value)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1] or counts.shape[0] < 1:
            raise ShapeError(f"La matriz de conteos debe ser cuadrada, no {counts.shape}")
        if counts.dtype.kind not in "iu":
            raise DomainError(f"Los conteos deben ser enteros, no {counts.dtype}")
        if counts.dtype.kind == "i" and counts.size and counts.min() < 0:
            raise DomainError("Los conteos no pueden ser negativos")
        counts = counts.astype(np.uint64)
        counts.flags.writeable = False
        return counts

    @computed_field
    @property
    def order(self) -> int:
        return int(self.counts.shape[0])

    @computed_field
    @property
    def pair_total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, CoMatrix):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        np.savetxt(
            buffer, self.counts, fmt="%d", delimiter=",",
            header=f"order={self.order},pair_total={self.pair_total}"
        )
        return buffer.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "order": self.order,
            "pair_total": self.pair_total,
            "counts": self.counts.tolist()
        })


class NormCoMatrix(BaseModel):
    """GN_d: distribución conjunta de probabilidad de los pares (i, j)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    probs: np.ndarray

    @field_validator("probs", mode="before")
    @classmethod
    def _check_probs(cls, value):
        probs = np.asarray(value, dtype=np.float64)
        if probs.ndim != 2 or probs.shape[0] != probs.shape[1] or probs.shape[0] < 1:
            raise ShapeError(f"La matriz normalizada debe ser cuadrada, no {probs.shape}")
        if probs.min() < 0:
            raise DomainError("Probabilidades negativas en la matriz normalizada")
        if not math.isclose(math.fsum(probs.ravel()), 1.0, abs_tol=PROB_SUM_TOL):
            raise DomainError(f"La matriz normalizada suma {probs.sum()}, no 1")
        probs = probs.copy()
        probs.flags.writeable = False
        return probs

    @computed_field
    @property
    def order(self) -> int:
        return int(self.probs.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, NormCoMatrix):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        np.savetxt(buffer, self.probs, fmt="%.17g", delimiter=",", header=f"order={self.order}")
        return buffer.getvalue()

    def to_json(self) -> str:
        return json.dumps({"order": self.order, "probs": self.probs.tolist()})


def enumerate_directions(n: int) -> List[DirectionPattern]:
    """
    Conjunto canónico de direcciones independientes en n dimensiones.

    De cada par {p, -p} se queda el representante cuyo primer componente no
    nulo es +1; el resultado tiene (3^n - 1) / 2 patrones en orden lexicográfico.
    """
    if n < 1:
        raise DomainError(f"La dimensión debe ser >= 1: {n}")
    patterns = [
        components for components in itertools.product((-1, 0, 1), repeat=n)
        if any(components) and next(c for c in components if c != 0) == 1
    ]
    return [DirectionPattern(components=components) for components in sorted(patterns)]


def _pair_slices(dims: Sequence[int], offset: Sequence[int]):
    """Cortes (origen, destino) que alinean X con X + offset; None si no hay pares."""
    sources, targets = [], []
    for extent, step in zip(dims, offset):
        if abs(step) >= extent:
            return None
        if step >= 0:
            sources.append(slice(0, extent - step))
            targets.append(slice(step, extent))
        else:
            sources.append(slice(-step, extent))
            targets.append(slice(0, extent + step))
    return tuple(sources), tuple(targets)


def compute_glcm(image: NdImage, pattern: DirectionPattern, k: int = 1) -> CoMatrix:
    """
    counts[i][j] = número de puntos X con f(X) = i, X + k*patrón dentro de la
    imagen y f(X + k*patrón) = j.
    """
    if pattern.ndim != image.ndim:
        raise ShapeError(
            f"Dirección {pattern.label} de aridad {pattern.ndim} para imagen de dimensión {image.ndim}"
        )
    if k < 1:
        raise DomainError(f"La distancia k debe ser >= 1: {k}")

    order = image.levels
    offset = [k * c for c in pattern.components]
    aligned = _pair_slices(image.dims, offset)
    if aligned is None:
        logger.debug(f"Dirección {pattern.label}, k={k}: sin pares en {image.dims}")
        return CoMatrix(counts=np.zeros((order, order), dtype=np.uint64))

    sources, targets = aligned
    volume = image.array
    first = volume[sources].astype(np.int64).ravel()
    second = volume[targets].astype(np.int64).ravel()
    counts = np.bincount(first * order + second, minlength=order * order)
    matrix = CoMatrix(counts=counts.reshape(order, order))
    logger.debug(f"Dirección {pattern.label}, k={k}: {matrix.pair_total} pares")
    return matrix


def transpose(m: CoMatrix) -> CoMatrix:
    """G_{-d} = G_d'."""
    return CoMatrix(counts=m.counts.T)


def symmetrize(m: CoMatrix, m_rev: CoMatrix) -> CoMatrix:
    if m.order != m_rev.order:
        raise ShapeError(f"Órdenes distintos: {m.order} y {m_rev.order}")
    return CoMatrix(counts=m.counts + m_rev.counts)


def normalize(m: CoMatrix) -> NormCoMatrix:
    """GN_d = G_d / total de pares."""
    total = m.pair_total
    if total == 0:
        raise EmptyMatrixError(
            "La matriz de co-ocurrencia no tiene pares (imagen demasiado pequeña para el desplazamiento)"
        )
    return NormCoMatrix(probs=m.counts / total)


def parse_direction(text: str) -> DirectionPattern:
    """'1,0,-1' -> DirectionPattern((1, 0, -1)). No exige forma canónica."""
    try:
        components = [int(part) for part in text.replace(" ", "").split(",") if part != ""]
    except ValueError:
        raise DomainError(f"Dirección mal formada: '{text}'")
    return DirectionPattern(components=components)


def parse_directions(text: str, n: int) -> List[DirectionPattern]:
    """'all' -> conjunto canónico; '1,0;0,1' -> lista explícita (se valida la aridad)."""
    if text.strip().lower() == "all":
        return enumerate_directions(n)
    patterns = [parse_direction(chunk) for chunk in text.split(";") if chunk.strip()]
    if not patterns:
        raise DomainError("Lista de direcciones vacía")
    for pattern in patterns:
        if pattern.ndim != n:
            raise ShapeError(f"Dirección {pattern.label} de aridad {pattern.ndim}, se esperaba {n}")
    return patterns
