"""
Modelo de imagen en escala de grises n-dimensional.

La intensidad de cada punto X = (x0, x1, ..., xn-1) se guarda en un arreglo
plano con el eje 0 variando más rápido:

    index = x0 + dims0 * (x1 + dims1 * (x2 + ...))

Para una imagen 2-D el eje 0 es la columna dentro de la fila y el eje 1 la fila;
para volúmenes el eje 2 es el número de corte.
"""
import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationInfo, field_validator

from app.utils.exceptions import DomainError, ShapeError

logger = logging.getLogger(__name__)

# uint16 alcanza para 65 536 niveles; más niveles harían inviable la GLCM densa
MAX_LEVELS = 65536


class NdImage(BaseModel):
    """Imagen inmutable: extensiones por eje, número de niveles y datos planos."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dims: Tuple[int, ...]
    levels: int
    data: np.ndarray

    @field_validator("dims", mode="before")
    @classmethod
    def _check_dims(cls, value):
        dims = tuple(int(v) for v in value)
        if not dims:
            raise ShapeError("La imagen necesita al menos un eje (n >= 1)")
        if any(extent < 1 for extent in dims):
            raise ShapeError(f"Todas las extensiones deben ser >= 1: {dims}")
        return dims

    @field_validator("levels", mode="before")
    @classmethod
    def _check_levels(cls, value):
        levels = int(value)
        if not 1 <= levels <= MAX_LEVELS:
            raise DomainError(f"Número de niveles fuera de rango [1, {MAX_LEVELS}]: {levels}")
        return levels

    @field_validator("data", mode="before")
    @classmethod
    def _check_data(cls, value, info: ValidationInfo):
        array = np.asarray(value)
        if array.dtype.kind not in "iub":
            raise DomainError(f"Las intensidades deben ser enteras, no {array.dtype}")
        if array.ndim != 1:
            raise ShapeError("Los datos deben venir como secuencia plana (eje 0 más rápido)")

        dims = info.data.get("dims")
        levels = info.data.get("levels")
        if dims is None or levels is None:
            return array
        if array.size != math.prod(dims):
            raise ShapeError(
                f"Longitud de datos {array.size} distinta del producto de extensiones {dims}"
            )
        if array.size and (array.min() < 0 or array.max() >= levels):
            raise DomainError(
                f"Intensidades fuera de [0, {levels}): min={array.min()}, max={array.max()}"
            )

        stored = array.astype(np.uint16)
        stored.flags.writeable = False
        return stored

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def array(self) -> np.ndarray:
        """Vista n-D indexada como [x0, x1, ..., xn-1]."""
        return self.data.reshape(self.dims, order="F")

    def to_nested(self) -> np.ndarray:
        """Arreglo en orden fila-mayor (cortes, filas, columnas) como lo escribe una persona."""
        return self.data.reshape(self.dims[::-1])

    def __eq__(self, other) -> bool:
        if not isinstance(other, NdImage):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.levels == other.levels
            and np.array_equal(self.data, other.data)
        )


def from_array(array, levels: int) -> NdImage:
    """Construye una imagen desde un arreglo indexado por ejes [x0, x1, ...]."""
    array = np.asarray(array)
    return NdImage(dims=array.shape, levels=levels, data=array.ravel(order="F"))


def from_nested(nested, levels: int) -> NdImage:
    """
    Construye una imagen desde una matriz anidada fila-mayor: el último índice
    es la columna (eje 0), el penúltimo la fila (eje 1), y así sucesivamente.
    """
    try:
        array = np.asarray(nested)
    except ValueError as e:
        raise ShapeError(f"Matriz irregular: {e}")
    if array.dtype == object:
        raise ShapeError("Matriz irregular: las filas no tienen la misma longitud")
    if array.ndim == 0:
        raise ShapeError("Se esperaba al menos una dimensión")
    return NdImage(dims=array.shape[::-1], levels=levels, data=array.ravel())


def from_slices(slices: Sequence, levels: int) -> NdImage:
    """
    Construye un volumen 3-D a partir de cortes 2-D.

    Columna dentro de la fila = eje 0, fila = eje 1, corte = eje 2.
    """
    try:
        matrices = [np.asarray(s) for s in slices]
    except ValueError as e:
        raise ShapeError(f"Corte irregular: {e}")
    if not matrices:
        raise ShapeError("Se necesita al menos un corte")
    for position, matrix in enumerate(matrices):
        if matrix.dtype == object or matrix.ndim != 2:
            raise ShapeError(f"El corte {position} no es una matriz 2-D regular")
        if matrix.shape != matrices[0].shape:
            raise ShapeError(
                f"El corte {position} mide {matrix.shape}, se esperaba {matrices[0].shape}"
            )
    return from_nested(np.stack(matrices), levels)


def get(image: NdImage, point: Sequence[int]) -> Optional[int]:
    """
    Devuelve f(point), o None si el punto cae fuera de la imagen.

    None es la señal de fuera-de-rango que usan los contadores de pares.
    """
    if len(point) != image.ndim:
        raise ShapeError(f"Punto de aridad {len(point)} para imagen de dimensión {image.ndim}")
    if any(not 0 <= x < extent for x, extent in zip(point, image.dims)):
        return None
    index = np.ravel_multi_index(tuple(point), image.dims, order="F")
    return int(image.data[index])


def quantize(image: NdImage, target_levels: int) -> NdImage:
    """Re-cuantiza por intervalos uniformes: v -> floor(v * target / levels)."""
    if target_levels < 1:
        raise DomainError(f"target_levels debe ser >= 1: {target_levels}")
    scaled = image.data.astype(np.int64) * int(target_levels) // image.levels
    logger.debug(f"Cuantización {image.levels} -> {target_levels} niveles")
    return NdImage(dims=image.dims, levels=target_levels, data=scaled)
