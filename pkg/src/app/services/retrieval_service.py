import json
import logging
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.models.schemas import (
    FEATURE_SETS,
    CorpusEntry,
    ImageFeatures,
    PrecisionReport,
    QueryPrecision,
    RetrievalIndex,
)
from app.utils.exceptions import DomainError, DuplicateIdError, SchemaError, UnknownIdError

logger = logging.getLogger(__name__)


class RetrievalService:
    """
    Índice de vectores de características con búsqueda exacta por barrido lineal.

    Distancia euclídea sobre dimensiones normalizadas min-max; las dimensiones
    constantes (max == min) no aportan a la distancia.
    """

    def __init__(self, workers: Optional[int] = None):
        self.workers = workers or settings.WORKERS

    def entries_from_features(
        self,
        records: Sequence[ImageFeatures],
        feature_set: str = "trace4"
    ) -> Tuple[List[CorpusEntry], List[str]]:
        """Selecciona el subconjunto de componentes que se indexa."""
        if feature_set not in FEATURE_SETS:
            raise DomainError(f"Conjunto de características desconocido: {feature_set}")
        names = FEATURE_SETS[feature_set]
        entries = [
            CorpusEntry(id=record.id, class_label=record.class_label, features=record.features.select(names))
            for record in records
        ]
        return entries, list(names)

    def build_index(
        self,
        entries: Sequence[CorpusEntry],
        feature_schema: Optional[Sequence[str]] = None,
        extraction: Optional[Dict] = None
    ) -> RetrievalIndex:
        if not entries:
            raise SchemaError("El índice necesita al menos una entrada")

        width = len(entries[0].features)
        schema = list(feature_schema) if feature_schema is not None else [f"f{d}" for d in range(width)]
        if len(schema) != width:
            raise SchemaError(f"El esquema tiene {len(schema)} nombres para vectores de {width} componentes")

        seen = set()
        for entry in entries:
            if entry.id in seen:
                raise DuplicateIdError(f"Id duplicado en el índice: {entry.id}")
            seen.add(entry.id)
            if len(entry.features) != width:
                raise SchemaError(
                    f"La entrada {entry.id} tiene {len(entry.features)} componentes, se esperaban {width}"
                )

        matrix = np.array([entry.features for entry in entries], dtype=np.float64)
        stats = [(float(low), float(high)) for low, high in zip(matrix.min(axis=0), matrix.max(axis=0))]
        index = RetrievalIndex(
            feature_schema=schema,
            norm_stats=stats,
            entries=list(entries),
            extraction=dict(extraction or {})
        )
        constant = [schema[d] for d in index.constant_dims]
        if constant:
            logger.warning(f"Dimensiones constantes (no aportan a la distancia): {constant}")
        logger.info(f"Índice construido: {len(entries)} entradas, esquema {schema}")
        return index

    def _normalized(self, index: RetrievalIndex, vectors: np.ndarray) -> np.ndarray:
        active = [d for d in range(len(index.norm_stats)) if d not in set(index.constant_dims)]
        low = np.array([index.norm_stats[d][0] for d in active], dtype=np.float64)
        span = np.array([index.norm_stats[d][1] - index.norm_stats[d][0] for d in active], dtype=np.float64)
        return (vectors[..., active] - low) / span

    def query(
        self,
        index: RetrievalIndex,
        target: Sequence[float],
        m: int,
        exclude_id: Optional[str] = None
    ) -> List[Tuple[str, float]]:
        """
        Los min(m, disponibles) vecinos más cercanos como (id, distancia),
        ordenados por distancia y luego por id.
        """
        if m < 1:
            raise DomainError(f"m debe ser >= 1: {m}")
        target = np.asarray(target, dtype=np.float64)
        if target.shape != (len(index.feature_schema),):
            raise SchemaError(
                f"La sonda tiene forma {target.shape}, el esquema {index.feature_schema}"
            )

        candidates = [entry for entry in index.entries if entry.id != exclude_id]
        if not candidates:
            return []
        matrix = np.array([entry.features for entry in candidates], dtype=np.float64)
        deltas = self._normalized(index, matrix) - self._normalized(index, target)
        distances = np.sqrt((deltas ** 2).sum(axis=1))

        ranked = sorted(zip(distances.tolist(), (entry.id for entry in candidates)), key=lambda hit: (hit[0], hit[1]))
        return [(entry_id, distance) for distance, entry_id in ranked[:m]]

    def evaluate(
        self,
        index: RetrievalIndex,
        query_ids: Sequence[str],
        m: int = 8,
        include_self: bool = True,
        feature_set: Optional[str] = None
    ) -> PrecisionReport:
        """Precisión@m por consulta (relevantes = misma clase) y su promedio."""
        by_id = {entry.id: entry for entry in index.entries}
        unknown = [query_id for query_id in query_ids if query_id not in by_id]
        if unknown:
            raise UnknownIdError(f"Ids de consulta inexistentes en el índice: {unknown}")
        if not query_ids:
            raise DomainError("Se necesita al menos una consulta")

        def precision_of(query_id: str) -> QueryPrecision:
            entry = by_id[query_id]
            hits = self.query(index, entry.features, m, exclude_id=None if include_self else query_id)
            relevant = sum(1 for hit_id, _ in hits if by_id[hit_id].class_label == entry.class_label)
            return QueryPrecision(query_id=query_id, precision=relevant / m)

        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                rows = list(pool.map(precision_of, query_ids))
        else:
            rows = [precision_of(query_id) for query_id in query_ids]

        rows.sort(key=lambda row: row.query_id)
        average = math.fsum(row.precision for row in rows) / len(rows)
        logger.info(
            f"Evaluación: {len(rows)} consultas, m={m}, include_self={include_self}, "
            f"precisión promedio {average:.4f}"
        )
        return PrecisionReport(
            per_query=rows,
            average_precision=average,
            m=m,
            include_self=include_self,
            feature_set=feature_set
        )

    def protocol_queries(self, index: RetrievalIndex, positions: Sequence[int] = (0, 3)) -> List[str]:
        """
        Consultas del protocolo: la primera y la cuarta imagen de cada clase,
        según el orden lexicográfico de ids dentro de la clase.
        """
        classes: Dict[str, List[str]] = defaultdict(list)
        for entry in index.entries:
            classes[entry.class_label].append(entry.id)

        sizes = {len(ids) for ids in classes.values()}
        if len(sizes) > 1:
            logger.warning(f"Corpus no balanceado: tamaños de clase {sorted(sizes)}")

        queries = []
        for label in sorted(classes):
            ids = sorted(classes[label])
            queries.extend(ids[position] for position in positions if position < len(ids))
        return queries

    def save_index(self, index: RetrievalIndex, path) -> None:
        Path(path).write_text(index.model_dump_json(by_alias=True, indent=2), encoding="utf-8")

    def load_index(self, path) -> RetrievalIndex:
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise SchemaError(f"No se pudo leer el índice {path}: {e}")
        return RetrievalIndex.model_validate(payload)


# Instancia global del servicio
retrieval_service = RetrievalService()
