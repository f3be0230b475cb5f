import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from app.core.config import settings
from app.core.cooccur import (
    DirectionPattern,
    NormCoMatrix,
    compute_glcm,
    enumerate_directions,
    normalize,
    symmetrize,
)
from app.core.ndgrid import NdImage
from app.models.schemas import HARALICK_NAMES, QUARTER_NAMES, FeatureVector, ImageFeatures
from app.utils.exceptions import DomainError, EmptyMatrixError

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ["id", "class", "trace"] + QUARTER_NAMES + HARALICK_NAMES


class FeatureService:
    """
    Descriptores de textura sobre matrices de co-ocurrencia normalizadas:
    traza, traza por cuartos y las cuatro características de Haralick
    (contrast, correlation, energy, homogeneity).
    """

    def __init__(self, workers: Optional[int] = None):
        self.workers = workers or settings.WORKERS

    def trace(self, m: NormCoMatrix) -> float:
        """Suma de la diagonal principal; alta cuando hay regiones constantes."""
        return math.fsum(np.diag(m.probs))

    def trace_quarters(self, m: NormCoMatrix) -> Tuple[float, float, float, float]:
        """Diagonal partida en [floor(q*N/4), floor((q+1)*N/4)), q = 0..3."""
        order = m.order
        if order < 4:
            raise DomainError(f"Los cuartos de la traza requieren orden >= 4, no {order}")
        diagonal = np.diag(m.probs)
        bounds = [q * order // 4 for q in range(5)]
        return tuple(math.fsum(diagonal[bounds[q]:bounds[q + 1]]) for q in range(4))

    def haralick4(self, m: NormCoMatrix) -> Tuple[float, float, float, float]:
        """
        (contrast, correlation, energy, homogeneity).

        La correlación es 0 cuando alguna varianza marginal es nula.
        """
        p = m.probs
        i, j = np.indices(p.shape, dtype=np.float64)
        gray = np.arange(m.order, dtype=np.float64)

        contrast = float(((i - j) ** 2 * p).sum())
        energy = float((p ** 2).sum())
        homogeneity = float((p / (1.0 + np.abs(i - j))).sum())

        p_row = p.sum(axis=1)
        p_col = p.sum(axis=0)
        mu_row = float((gray * p_row).sum())
        mu_col = float((gray * p_col).sum())
        sigma_row = math.sqrt(max(float(((gray - mu_row) ** 2 * p_row).sum()), 0.0))
        sigma_col = math.sqrt(max(float(((gray - mu_col) ** 2 * p_col).sum()), 0.0))
        denominator = sigma_row * sigma_col
        if denominator < np.finfo(np.float64).eps:
            correlation = 0.0
        else:
            covariance = float(((i - mu_row) * (j - mu_col) * p).sum())
            correlation = min(max(covariance / denominator, -1.0), 1.0)

        return contrast, correlation, energy, homogeneity

    def extract(self, m: NormCoMatrix) -> FeatureVector:
        """Todas las características de una matriz normalizada."""
        contrast, correlation, energy, homogeneity = self.haralick4(m)
        return FeatureVector(
            trace=self.trace(m),
            quarters=self.trace_quarters(m) if m.order >= 4 else None,
            contrast=contrast,
            correlation=correlation,
            energy=energy,
            homogeneity=homogeneity
        )

    def direction_matrix(
        self,
        image: NdImage,
        pattern: DirectionPattern,
        k: int = 1,
        symmetric: bool = False
    ) -> NormCoMatrix:
        """GN_d de una dirección; con `symmetric` se usa G_d + G_-d."""
        glcm = compute_glcm(image, pattern, k)
        if symmetric:
            glcm = symmetrize(glcm, compute_glcm(image, -pattern, k))
        try:
            return normalize(glcm)
        except EmptyMatrixError:
            raise EmptyMatrixError(
                f"La dirección {pattern.label} con k={k} no produce pares en una imagen {image.dims}"
            )

    def _matrices(self, image, directions, k, symmetric) -> List[NormCoMatrix]:
        def build(pattern):
            return self.direction_matrix(image, pattern, k, symmetric)

        if self.workers > 1 and len(directions) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(build, directions))
        return [build(pattern) for pattern in directions]

    def directional_features(
        self,
        image: NdImage,
        k: int = 1,
        directions: Optional[Sequence[DirectionPattern]] = None,
        symmetric: bool = False
    ) -> List[Tuple[DirectionPattern, FeatureVector]]:
        """Un FeatureVector por dirección, en el orden de `directions`."""
        directions = list(directions) if directions is not None else enumerate_directions(image.ndim)
        if not directions:
            raise DomainError("Se necesita al menos una dirección")
        matrices = self._matrices(image, directions, k, symmetric)
        return [(pattern, self.extract(matrix)) for pattern, matrix in zip(directions, matrices)]

    def averaged_features(
        self,
        image: NdImage,
        k: int = 1,
        directions: Optional[Sequence[DirectionPattern]] = None,
        symmetric: bool = False,
        mode: str = "features"
    ) -> FeatureVector:
        """
        Promedio sobre direcciones (por defecto las (3^n - 1)/2 canónicas).

        mode="features": características por dirección y luego la media.
        mode="matrix": características de la matriz normalizada promedio.
        Las sumas usan fsum, así que el resultado no depende del orden de las direcciones.
        """
        directions = list(directions) if directions is not None else enumerate_directions(image.ndim)
        if not directions:
            raise DomainError("Se necesita al menos una dirección")

        if mode == "matrix":
            matrices = self._matrices(image, directions, k, symmetric)
            stacked = np.stack([matrix.probs for matrix in matrices])
            mean = np.apply_along_axis(math.fsum, 0, stacked) / len(matrices)
            return self.extract(NormCoMatrix(probs=mean / mean.sum()))
        if mode != "features":
            raise DomainError(f"Modo de promedio desconocido: {mode}")

        vectors = [vector for _, vector in self.directional_features(image, k, directions, symmetric)]
        return mean_vector(vectors)

    def feature_table(self, records: Iterable[ImageFeatures]) -> pd.DataFrame:
        """Tabla con columnas id, class, trace, q1..q4, contrast, correlation, energy, homogeneity."""
        rows = [
            {"id": record.id, "class": record.class_label, **record.features.as_row()}
            for record in records
        ]
        return pd.DataFrame(rows, columns=TABLE_COLUMNS)


def mean_vector(vectors: Sequence[FeatureVector]) -> FeatureVector:
    """Media componente a componente (fsum: exacta e independiente del orden)."""
    count = len(vectors)

    def mean(values):
        return math.fsum(values) / count

    quarters = None
    if all(vector.quarters is not None for vector in vectors):
        quarters = tuple(mean(vector.quarters[q] for vector in vectors) for q in range(4))
    return FeatureVector(
        trace=mean(vector.trace for vector in vectors),
        quarters=quarters,
        contrast=mean(vector.contrast for vector in vectors),
        correlation=mean(vector.correlation for vector in vectors),
        energy=mean(vector.energy for vector in vectors),
        homogeneity=mean(vector.homogeneity for vector in vectors)
    )


# Instancia global del servicio
feature_service = FeatureService()
