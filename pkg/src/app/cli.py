"""
CLI del pipeline completo: glcm, features, index, query, evaluate, synth.

Códigos de salida: 0 éxito, 2 error de uso, 3 error de datos.
"""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from functools import wraps
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import click
import pandas as pd
from pydantic import ValidationError

from app.core.config import settings
from app.core.cooccur import compute_glcm, normalize, parse_direction, parse_directions
from app.core.imageio import read_image
from app.core.logger import setup_logging
from app.core.ndgrid import NdImage, quantize
from app.models.schemas import (
    FEATURE_SETS,
    FeatureVector,
    ImageFeatures,
    PrecisionReport,
    QueryHit,
    RunConfig,
    SynthSpec,
)
from app.services.corpus_service import corpus_service
from app.services.feature_service import TABLE_COLUMNS, feature_service
from app.services.retrieval_service import retrieval_service
from app.utils.exceptions import EXIT_DATA, NdGlcmError, UnknownIdError

logger = logging.getLogger(__name__)

# Precisión promedio de referencia sobre un corpus Brodatz de 36 clases x 9 imágenes
REFERENCE_PRECISION = {"trace4": 0.8194, "haralick4": 0.7222}

COMPARE_SETS = ["trace4", "haralick4", "combined8"]


def handle_cli_errors(func):
    """Errores del dominio -> mensaje en stderr y código de salida de datos."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (NdGlcmError, ValidationError) as e:
            logger.error(f"{func.__name__}: {e}")
            click.echo(f"Error: {e}", err=True)
            raise SystemExit(EXIT_DATA)
    return wrapper


def resolve_config(**options) -> RunConfig:
    """Valida la combinación de opciones antes de calcular e imprime la configuración."""
    try:
        config = RunConfig(**options)
    except ValidationError as e:
        raise click.UsageError(f"Configuración inválida: {e}")
    logger.info(f"Configuración resuelta: {config.model_dump_json()}")
    click.echo(f"# config {config.model_dump_json()}", err=True)
    return config


def emit(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
        logger.info(f"Resultado escrito en {output}")
    else:
        click.echo(text, nl=not text.endswith("\n"))


def prepare(image: NdImage, config: RunConfig) -> NdImage:
    return quantize(image, config.levels) if config.levels else image


def image_features(image: NdImage, config: RunConfig) -> FeatureVector:
    image = prepare(image, config)
    directions = parse_directions(config.directions, image.ndim)
    return feature_service.averaged_features(
        image, k=config.k, directions=directions, symmetric=config.symmetric, mode=config.mode
    )


def load_items(source: str, config: RunConfig) -> List[Tuple[str, str, NdImage]]:
    """(id, clase, imagen) de un dataset (carpeta) o de una sola imagen."""
    path = Path(source)
    if path.is_dir():
        manifest = corpus_service.load_dataset(path)
        return [(record.id, label, image) for label, record, image in corpus_service.iter_images(manifest)]
    return [(path.stem, path.parent.name, read_image(path))]


def extract_all(items: List[Tuple[str, str, NdImage]], config: RunConfig) -> List[ImageFeatures]:
    """Extracción por imagen (en paralelo si workers > 1); el orden es el del manifiesto."""
    total = len(items)
    done = []

    def extract(item):
        image_id, label, image = item
        vector = image_features(image, config)
        done.append(image_id)
        logger.info(f"{len(done)}/{total} {image_id}")
        return ImageFeatures(id=image_id, class_label=label, features=vector)

    if config.workers > 1 and total > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(extract, items))
    return [extract(item) for item in items]


def extraction_params(config: RunConfig) -> Dict:
    return {
        "k": config.k,
        "levels": config.levels,
        "directions": config.directions,
        "symmetric": config.symmetric,
        "mode": config.mode,
        "feature_set": config.feature_set,
    }


def extraction_options(func):
    """Opciones comunes de extracción de características."""
    options = [
        click.option("--k", "k", type=int, default=settings.DEFAULT_DISTANCE, show_default=True,
                     help="Distancia k del desplazamiento."),
        click.option("--levels", type=int, default=None,
                     help="Re-cuantizar a este número de niveles de gris antes de extraer."),
        click.option("--directions", default="all", show_default=True,
                     help="'all' (las (3^n-1)/2 canónicas) o lista explícita '1,0;0,1'."),
        click.option("--symmetric/--no-symmetric", default=False, show_default=True,
                     help="Usar G_d + G_-d en lugar de G_d."),
        click.option("--mode", type=click.Choice(["features", "matrix"]), default="features", show_default=True,
                     help="Promediar características por dirección o la matriz normalizada."),
        click.option("--workers", type=int, default=settings.WORKERS, show_default=True,
                     help="Hilos para la extracción por imagen."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group()
@click.option("--log-level", default=None, help="Nivel de logging (por defecto settings.LOG_LEVEL).")
def cli(log_level):
    """Matrices de co-ocurrencia n-D, traza y recuperación de imágenes por contenido."""
    setup_logging(log_level)


@cli.command()
@click.argument("image_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--direction", required=True, help="Patrón de dirección, p. ej. '1,0,0'.")
@click.option("--k", "k", type=int, default=settings.DEFAULT_DISTANCE, show_default=True)
@click.option("--levels", type=int, default=None, help="Re-cuantizar antes de contar.")
@click.option("--normalize/--no-normalize", "normalized", default=False, show_default=True,
              help="Imprimir GN_d en lugar de G_d.")
@click.option("--format", "output_format", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), default=None)
@handle_cli_errors
def glcm(image_path, direction, k, levels, normalized, output_format, output):
    """Matriz de co-ocurrencia de una imagen en una dirección."""
    config = resolve_config(
        command="glcm", k=k, levels=levels, directions=direction,
        output_format=output_format, paths={"image": image_path}
    )
    image = prepare(read_image(image_path), config)
    matrix = compute_glcm(image, parse_direction(direction), config.k)
    if normalized:
        matrix = normalize(matrix)
    emit(matrix.to_csv() if output_format == "csv" else matrix.to_json(), output)


@cli.command()
@click.argument("source", type=click.Path(exists=True))
@extraction_options
@click.option("--per-direction", is_flag=True, default=False, help="Una fila por imagen y dirección.")
@click.option("--format", "output_format", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), default=None)
@handle_cli_errors
def features(source, k, levels, directions, symmetric, mode, workers, per_direction, output_format, output):
    """Características (traza, cuartos, Haralick-4) de un dataset o una imagen."""
    config = resolve_config(
        command="features", k=k, levels=levels, directions=directions, symmetric=symmetric,
        mode=mode, workers=workers, output_format=output_format, paths={"source": source}
    )
    items = load_items(source, config)

    if per_direction:
        rows = []
        for image_id, label, image in items:
            image = prepare(image, config)
            table = feature_service.directional_features(
                image, config.k, parse_directions(config.directions, image.ndim), config.symmetric
            )
            rows.extend(
                {"id": image_id, "class": label, "direction": pattern.label, **vector.as_row()}
                for pattern, vector in table
            )
        frame = pd.DataFrame(rows, columns=["id", "class", "direction"] + TABLE_COLUMNS[2:])
    else:
        frame = feature_service.feature_table(extract_all(items, config))

    emit(frame.to_csv(index=False) if output_format == "csv" else frame.to_json(orient="records", indent=2), output)


@cli.command()
@click.argument("dataset", type=click.Path(exists=True, file_okay=False))
@extraction_options
@click.option("--feature-set", type=click.Choice(list(FEATURE_SETS)), default="trace4", show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), required=True, help="Archivo JSON del índice.")
@handle_cli_errors
def index(dataset, k, levels, directions, symmetric, mode, workers, feature_set, output):
    """Construye y guarda el índice de recuperación de un dataset."""
    config = resolve_config(
        command="index", k=k, levels=levels, directions=directions, symmetric=symmetric,
        mode=mode, workers=workers, feature_set=feature_set, paths={"dataset": dataset, "output": output}
    )
    records = extract_all(load_items(dataset, config), config)
    entries, schema = retrieval_service.entries_from_features(records, config.feature_set)
    built = retrieval_service.build_index(entries, schema, extraction_params(config))
    retrieval_service.save_index(built, output)
    click.echo(f"Índice con {len(built.entries)} entradas escrito en {output}", err=True)


@cli.command()
@click.argument("index_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("query_id", required=False)
@click.option("--image", "image_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Consultar con una imagen externa en lugar de un id del índice.")
@click.option("--m", "m", type=int, default=settings.DEFAULT_RETRIEVED, show_default=True)
@click.option("--include-self/--exclude-self", default=settings.INCLUDE_SELF, show_default=True)
@click.option("--format", "output_format", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@handle_cli_errors
def query(index_path, query_id, image_path, m, include_self, output_format):
    """Los m vecinos más cercanos de un id del índice o de una imagen."""
    if (query_id is None) == (image_path is None):
        raise click.UsageError("Indique un QUERY_ID o --image, pero no ambos")
    loaded = retrieval_service.load_index(index_path)
    params = loaded.extraction
    config = resolve_config(
        command="query", m=m, include_self=include_self, output_format=output_format,
        k=params.get("k", 1), levels=params.get("levels"), directions=params.get("directions", "all"),
        symmetric=params.get("symmetric", False), mode=params.get("mode", "features"),
        feature_set=params.get("feature_set", "trace4"),
        paths={"index": index_path, **({"image": image_path} if image_path else {})}
    )

    if query_id is not None:
        entry = next((entry for entry in loaded.entries if entry.id == query_id), None)
        if entry is None:
            raise UnknownIdError(f"Id de consulta inexistente en el índice: {query_id}")
        target, exclude = entry.features, (None if config.include_self else query_id)
    else:
        vector = image_features(read_image(image_path), config)
        target, exclude = vector.select(loaded.feature_schema), None

    hits = [QueryHit(id=hit_id, distance=distance)
            for hit_id, distance in retrieval_service.query(loaded, target, config.m, exclude)]
    if output_format == "json":
        emit(json.dumps([hit.model_dump() for hit in hits], indent=2), None)
    else:
        emit("id,distance\n" + "".join(f"{hit.id},{hit.distance:.10g}\n" for hit in hits), None)


def run_protocol(records: List[ImageFeatures], feature_set: str, config: RunConfig) -> PrecisionReport:
    entries, schema = retrieval_service.entries_from_features(records, feature_set)
    built = retrieval_service.build_index(entries, schema, extraction_params(config))
    queries = retrieval_service.protocol_queries(built)
    return retrieval_service.evaluate(built, queries, config.m, config.include_self, feature_set)


def render_report(report: PrecisionReport, output_format: str) -> str:
    return report.to_csv() if output_format == "csv" else report.model_dump_json(indent=2)


@cli.command()
@click.argument("source", type=click.Path(exists=True), required=False)
@extraction_options
@click.option("--feature-set", type=click.Choice(list(FEATURE_SETS)), default="trace4", show_default=True)
@click.option("--compare", is_flag=True, default=False,
              help="Evaluar trace4, haralick4 y combined8 sobre el mismo corpus.")
@click.option("--m", "m", type=int, default=settings.DEFAULT_RETRIEVED, show_default=True)
@click.option("--include-self/--exclude-self", default=settings.INCLUDE_SELF, show_default=True)
@click.option("--format", "output_format", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--output", type=click.Path(), default=None,
              help="Archivo del informe (o carpeta con --compare).")
@handle_cli_errors
def evaluate(source, k, levels, directions, symmetric, mode, workers, feature_set, compare,
             m, include_self, output_format, output):
    """
    Protocolo de recuperación: consultas = 1ª y 4ª imagen de cada clase, m = 8.

    SOURCE es un dataset o un índice .json; sin SOURCE se usa NDGLCM_DATASET_ROOT
    (modo reproducción: compara los conjuntos e imprime los valores de referencia).
    """
    reproduction = source is None
    if reproduction:
        if not settings.DATASET_ROOT:
            raise click.UsageError("Indique SOURCE o defina NDGLCM_DATASET_ROOT")
        source = settings.DATASET_ROOT
        compare = True

    config = resolve_config(
        command="evaluate", k=k, levels=levels, directions=directions, symmetric=symmetric, mode=mode,
        workers=workers, feature_set=feature_set, m=m, include_self=include_self,
        output_format=output_format, paths={"source": str(source), **({"output": output} if output else {})}
    )

    if Path(source).is_file():
        if compare:
            raise click.UsageError("--compare necesita un dataset, no un índice")
        loaded = retrieval_service.load_index(source)
        report = retrieval_service.evaluate(
            loaded, retrieval_service.protocol_queries(loaded), config.m, config.include_self,
            loaded.extraction.get("feature_set")
        )
        emit(render_report(report, output_format), output)
        return

    records = extract_all(load_items(source, config), config)
    if not compare:
        emit(render_report(run_protocol(records, config.feature_set, config), output_format), output)
        return

    reports = {name: run_protocol(records, name, config) for name in COMPARE_SETS}
    if output:
        folder = Path(output)
        folder.mkdir(parents=True, exist_ok=True)
        for name, report in reports.items():
            (folder / f"report-{name}.{output_format}").write_text(render_report(report, output_format), encoding="utf-8")

    click.echo(f"imágenes: {len(records)}  consultas: {len(reports['trace4'].per_query)}  m: {config.m}")
    for name, report in reports.items():
        line = f"{name:<10} {report.average_precision:.4f}"
        if reproduction and name in REFERENCE_PRECISION:
            line += f"   (referencia {REFERENCE_PRECISION[name]:.4f})"
        click.echo(line)


@cli.command()
@click.argument("root", type=click.Path(file_okay=False))
@click.option("--classes", "class_count", type=int, default=36, show_default=True)
@click.option("--per-class", type=int, default=9, show_default=True)
@click.option("--size", type=int, default=64, show_default=True)
@click.option("--levels", type=int, default=32, show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
@handle_cli_errors
def synth(root, class_count, per_class, size, levels, seed):
    """Genera un corpus sintético determinista en ROOT."""
    resolve_config(command="synth", levels=levels, seed=seed, paths={"root": root})
    try:
        spec = SynthSpec(class_count=class_count, per_class=per_class, size=size, levels=levels, seed=seed)
    except ValidationError as e:
        raise click.UsageError(f"Especificación inválida: {e}")
    manifest = corpus_service.write_synthetic(spec, root)
    click.echo(f"{manifest.image_count} imágenes en {len(manifest.classes)} clases escritas en {root}", err=True)


if __name__ == "__main__":
    cli()
