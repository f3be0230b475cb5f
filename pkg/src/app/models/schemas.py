import math
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.utils.exceptions import DomainError

# Tolerancia para chequeos de rango sobre sumas en punto flotante
RANGE_TOL = 1e-9

HARALICK_NAMES = ["contrast", "correlation", "energy", "homogeneity"]
QUARTER_NAMES = ["q1", "q2", "q3", "q4"]

# Subconjuntos de componentes que se indexan para recuperación
FEATURE_SETS: Dict[str, List[str]] = {
    "trace1": ["trace"],
    "trace4": QUARTER_NAMES,
    "haralick4": HARALICK_NAMES,
    "combined8": QUARTER_NAMES + HARALICK_NAMES,
}

FeatureSetName = Literal["trace1", "trace4", "haralick4", "combined8"]


#=========================================================================================
# Características de textura
#=========================================================================================

class FeatureVector(BaseModel):
    """
    Descriptores de textura de una matriz normalizada (o su promedio por direcciones).

    `quarters` es None cuando la matriz tiene menos de 4 niveles (cuartos indefinidos).
    """
    model_config = ConfigDict(frozen=True)

    trace: float
    quarters: Optional[Tuple[float, float, float, float]] = None
    contrast: float
    correlation: float
    energy: float
    homogeneity: float

    @model_validator(mode="after")
    def _check_ranges(self):
        if not -RANGE_TOL <= self.trace <= 1 + RANGE_TOL:
            raise DomainError(f"trace fuera de [0, 1]: {self.trace}")
        if self.contrast < -RANGE_TOL:
            raise DomainError(f"contrast negativo: {self.contrast}")
        if abs(self.correlation) > 1 + RANGE_TOL:
            raise DomainError(f"correlation fuera de [-1, 1]: {self.correlation}")
        for name in ("energy", "homogeneity"):
            value = getattr(self, name)
            if not 0 < value <= 1 + RANGE_TOL:
                raise DomainError(f"{name} fuera de (0, 1]: {value}")
        if self.quarters is not None:
            if any(not -RANGE_TOL <= q <= 1 + RANGE_TOL for q in self.quarters):
                raise DomainError(f"Cuartos fuera de [0, 1]: {self.quarters}")
            if not math.isclose(math.fsum(self.quarters), self.trace, abs_tol=RANGE_TOL):
                raise DomainError(f"Los cuartos suman {math.fsum(self.quarters)}, la traza es {self.trace}")
        return self

    def as_row(self) -> Dict[str, Optional[float]]:
        """Componentes con nombre en el orden de las columnas CSV."""
        quarters = self.quarters if self.quarters is not None else (None,) * 4
        row: Dict[str, Optional[float]] = {"trace": self.trace}
        row.update(zip(QUARTER_NAMES, quarters))
        row.update({name: getattr(self, name) for name in HARALICK_NAMES})
        return row

    def select(self, names: List[str]) -> List[float]:
        """Vector ordenado con los componentes pedidos."""
        row = self.as_row()
        missing = [name for name in names if row.get(name) is None]
        if missing:
            raise DomainError(
                f"Componentes no disponibles: {missing} (los cuartos requieren al menos 4 niveles)"
            )
        return [float(row[name]) for name in names]


class ImageFeatures(BaseModel):
    """Fila de la tabla de características: id, clase y vector."""
    id: str
    class_label: str
    features: FeatureVector


#=========================================================================================
# Recuperación
#=========================================================================================

class CorpusEntry(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    id: str
    class_label: str = Field(alias="class")
    features: List[float]


class RetrievalIndex(BaseModel):
    """Corpus etiquetado más estadísticas (min, max) por dimensión tomadas al construir."""
    model_config = ConfigDict(populate_by_name=True)

    feature_schema: List[str] = Field(alias="schema")
    norm_stats: List[Tuple[float, float]]
    entries: List[CorpusEntry]
    # Parámetros de extracción con los que se calcularon los vectores
    extraction: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_stats(self):
        if len(self.norm_stats) != len(self.feature_schema):
            raise DomainError("norm_stats y el esquema tienen longitudes distintas")
        if any(high < low for low, high in self.norm_stats):
            raise DomainError("norm_stats con max < min")
        return self

    @property
    def constant_dims(self) -> List[int]:
        return [position for position, (low, high) in enumerate(self.norm_stats) if high == low]


class QueryHit(BaseModel):
    id: str
    distance: float


class QueryPrecision(BaseModel):
    query_id: str
    precision: float = Field(ge=0.0, le=1.0)


class PrecisionReport(BaseModel):
    per_query: List[QueryPrecision]
    average_precision: float = Field(ge=0.0, le=1.0)
    m: int
    include_self: bool
    feature_set: Optional[str] = None

    def to_csv(self) -> str:
        lines = ["query_id,precision"]
        lines.extend(f"{row.query_id},{row.precision:.6f}" for row in self.per_query)
        lines.append(f"average_precision,{self.average_precision:.6f}")
        return "\n".join(lines) + "\n"


#=========================================================================================
# Corpus
#=========================================================================================

class ImageRecord(BaseModel):
    id: str
    path: str
    dims: Tuple[int, ...]
    levels: int


class ClassImages(BaseModel):
    label: str
    images: List[ImageRecord]


class DatasetManifest(BaseModel):
    """Corpus con orden determinista: clases e imágenes en orden lexicográfico."""
    root: str
    classes: List[ClassImages]
    generator: Optional[str] = None

    @property
    def records(self) -> List[Tuple[str, ImageRecord]]:
        return [(group.label, record) for group in self.classes for record in group.images]

    @property
    def image_count(self) -> int:
        return sum(len(group.images) for group in self.classes)


class SynthSpec(BaseModel):
    class_count: int = Field(36, ge=2)
    per_class: int = Field(9, ge=2)
    size: int = Field(64, ge=4)
    levels: int = Field(32, ge=4, le=65536)
    seed: int = Field(7, ge=0)


#=========================================================================================
# Configuración de una ejecución del CLI
#=========================================================================================

class RunConfig(BaseModel):
    """Comando y opciones resueltas; se valida antes de calcular nada."""
    command: str
    k: int = Field(1, ge=1)
    levels: Optional[int] = Field(None, ge=1, le=65536)
    directions: str = "all"
    feature_set: FeatureSetName = "trace4"
    m: int = Field(8, ge=1)
    include_self: bool = True
    output_format: Literal["csv", "json"] = "csv"
    symmetric: bool = False
    mode: Literal["features", "matrix"] = "features"
    seed: Optional[int] = None
    workers: int = Field(1, ge=1)
    paths: Dict[str, str] = Field(default_factory=dict)

    @field_validator("directions")
    @classmethod
    def _check_directions(cls, value):
        if not value.strip():
            raise ValueError("la lista de direcciones no puede estar vacía")
        return value


#=========================================================================================
# Modelos de la API HTTP
#=========================================================================================

class StatusResponse(BaseModel):
    status: str
    message: str
    version: str


class GlcmRequest(BaseModel):
    """Volumen como lista de cortes 2-D, o imagen 2-D con un único corte y `flat=True`."""
    slices: List[List[List[int]]]
    levels: int
    direction: List[int]
    k: int = Field(1, ge=1)
    normalize: bool = False
    flat: bool = False


class GlcmResponse(BaseModel):
    order: int
    pair_total: int
    counts: Optional[List[List[int]]] = None
    probs: Optional[List[List[float]]] = None


class FeaturesRequest(BaseModel):
    slices: List[List[List[int]]]
    levels: int
    k: int = Field(1, ge=1)
    directions: Optional[List[List[int]]] = None
    symmetric: bool = False
    mode: Literal["features", "matrix"] = "features"
    flat: bool = False


class DirectionsResponse(BaseModel):
    n: int
    count: int
    directions: List[List[int]]
