import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from app.core.config import settings
from app.core.imageio import IMAGE_SUFFIXES, read_image, write_image
from app.core.ndgrid import NdImage, from_array, from_nested
from app.models.schemas import ClassImages, DatasetManifest, ImageRecord, SynthSpec
from app.utils.exceptions import DatasetError, DomainError, ImageFormatError, NdGlcmError, ShapeError

logger = logging.getLogger(__name__)

GENERATOR_ID = "numpy.random.PCG64/SeedSequence(seed, class, image)"
FAMILIES = ("constant", "stripes", "checker", "smooth")
MANIFEST_NAME = "manifest.json"
# Binario que acompaña a una cabecera .ndh
RAW_DATA_SUFFIX = ".raw"


def _byte_order(path: Path) -> bytes:
    return path.name.encode("utf-8")


class CorpusService:
    """Ingesta de datasets (una carpeta por clase), corte de láminas y corpus sintético."""

    def __init__(self, workers: Optional[int] = None):
        self.workers = workers or settings.WORKERS

    #=====================================================================================
    # Datasets en disco
    #=====================================================================================

    def load_dataset(self, root, use_cache: bool = True) -> DatasetManifest:
        """
        root/<clase>/<imagen>.pgm|png|ndh -> manifiesto con clases e imágenes
        en orden lexicográfico de bytes. Cualquier imagen ilegible aborta la carga.

        El manifiesto se guarda en root/manifest.json y se reutiliza mientras
        el listado de clases y archivos no cambie.
        """
        root = Path(root)
        if not root.is_dir():
            raise DatasetError(f"La raíz del dataset no existe o no es un directorio: {root}")

        class_dirs = sorted((entry for entry in root.iterdir() if entry.is_dir()), key=_byte_order)
        if not class_dirs:
            raise DatasetError(f"El dataset {root} no contiene carpetas de clase")
        listing = {class_dir.name: self._image_files(class_dir) for class_dir in class_dirs}

        if use_cache:
            cached = self._cached_manifest(root, listing)
            if cached is not None:
                logger.info(f"Dataset {root}: manifiesto en caché, {cached.image_count} imágenes")
                return cached

        classes = []
        for class_dir in class_dirs:
            files = listing[class_dir.name]
            if not files:
                raise DatasetError(f"La clase {class_dir.name} no tiene imágenes legibles")
            self._check_unique_stems(files)
            images = self._map(lambda path: self._record(root, class_dir.name, path), files)
            classes.append(ClassImages(label=class_dir.name, images=images))

        manifest = DatasetManifest(root=str(root), classes=classes)
        logger.info(f"Dataset {root}: {len(classes)} clases, {manifest.image_count} imágenes")
        if use_cache:
            try:
                self.save_manifest(manifest, root / MANIFEST_NAME)
            except OSError as e:
                logger.warning(f"No se pudo guardar el manifiesto en {root}: {e}")
        return manifest

    def _image_files(self, class_dir: Path) -> List[Path]:
        """Imágenes admitidas de una clase; el resto se descarta con un aviso."""
        files = []
        for entry in sorted(class_dir.iterdir(), key=_byte_order):
            if not entry.is_file():
                continue
            suffix = entry.suffix.lower()
            if suffix in IMAGE_SUFFIXES:
                files.append(entry)
            elif suffix != RAW_DATA_SUFFIX:
                logger.warning(f"Archivo ignorado (extensión no admitida): {entry}")
        return files

    def _check_unique_stems(self, files: Sequence[Path]) -> None:
        """El id es clase/nombre sin extensión: dos extensiones del mismo nombre colisionan."""
        seen: Dict[str, Path] = {}
        for path in files:
            if path.stem in seen:
                raise DatasetError(f"Id duplicado '{path.parent.name}/{path.stem}': {seen[path.stem]} y {path}")
            seen[path.stem] = path

    def _cached_manifest(self, root: Path, listing: Dict[str, List[Path]]) -> Optional[DatasetManifest]:
        path = root / MANIFEST_NAME
        if not path.is_file():
            return None
        try:
            cached = self.read_manifest(path)
        except (OSError, ValueError, NdGlcmError) as e:
            logger.warning(f"Manifiesto ilegible en {path}, se vuelve a escanear: {e}")
            return None
        current = [(label, [file.name for file in files]) for label, files in listing.items()]
        stored = [(group.label, [Path(record.path).name for record in group.images]) for group in cached.classes]
        if current != stored:
            logger.info(f"Manifiesto desactualizado en {path}, se vuelve a escanear")
            return None
        return cached.model_copy(update={"root": str(root)})

    def _record(self, root: Path, label: str, path: Path) -> ImageRecord:
        try:
            image = read_image(path)
        except ImageFormatError as e:
            logger.error(f"Imagen inválida: {e}")
            raise
        return ImageRecord(
            id=f"{label}/{path.stem}",
            path=str(path.relative_to(root)),
            dims=image.dims,
            levels=image.levels
        )

    def load_image(self, manifest: DatasetManifest, record: ImageRecord) -> NdImage:
        return read_image(Path(manifest.root) / record.path)

    def iter_images(self, manifest: DatasetManifest) -> List[Tuple[str, ImageRecord, NdImage]]:
        """(clase, registro, imagen) en el orden del manifiesto."""
        records = manifest.records
        images = self._map(lambda item: self.load_image(manifest, item[1]), records)
        return [(label, record, image) for (label, record), image in zip(records, images)]

    def save_manifest(self, manifest: DatasetManifest, path) -> None:
        Path(path).write_text(manifest.model_dump_json(indent=2), encoding="utf-8")

    def read_manifest(self, path) -> DatasetManifest:
        return DatasetManifest.model_validate_json(Path(path).read_text(encoding="utf-8"))

    def _map(self, func, items: Sequence) -> List:
        if self.workers > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(func, items))
        return [func(item) for item in items]

    #=====================================================================================
    # Corte de láminas maestras
    #=====================================================================================

    def split_master(self, image: NdImage, grid: Tuple[int, int]) -> List[NdImage]:
        """
        Corta una lámina en rows x cols subimágenes (orden fila-mayor).

        Filas = eje 1, columnas = eje 0; los ejes restantes se conservan enteros.
        """
        rows, cols = grid
        if rows < 1 or cols < 1:
            raise DomainError(f"Rejilla inválida: {grid}")
        if image.ndim < 2:
            raise ShapeError("split_master requiere al menos 2 ejes")
        width, height = image.dims[0], image.dims[1]
        if width % cols or height % rows:
            raise DomainError(
                f"Extensiones {width}x{height} no divisibles por la rejilla {rows}x{cols}"
            )

        tile_w, tile_h = width // cols, height // rows
        volume = image.array
        tiles = []
        for r in range(rows):
            for c in range(cols):
                block = volume[c * tile_w:(c + 1) * tile_w, r * tile_h:(r + 1) * tile_h]
                tiles.append(from_array(block, image.levels))
        return tiles

    def assemble_grid(self, tiles: Sequence[NdImage], grid: Tuple[int, int]) -> NdImage:
        """Inverso de split_master."""
        rows, cols = grid
        if len(tiles) != rows * cols:
            raise ShapeError(f"Se esperaban {rows * cols} subimágenes, hay {len(tiles)}")
        levels = {tile.levels for tile in tiles}
        if len(levels) != 1:
            raise DomainError(f"Subimágenes con distinto número de niveles: {sorted(levels)}")
        strips = [
            np.concatenate([tiles[r * cols + c].array for c in range(cols)], axis=0)
            for r in range(rows)
        ]
        return from_array(np.concatenate(strips, axis=1), levels.pop())

    #=====================================================================================
    # Corpus sintético
    #=====================================================================================

    def class_recipe(self, index: int, levels: int) -> Dict:
        """
        Parámetros fijos de la clase `index` (no dependen de la semilla).

        Las familias se alternan y cada variante cambia tanto la estructura
        como la banda de intensidades, para que la traza por cuartos y las
        características de Haralick tengan señal.
        """
        family = FAMILIES[index % len(FAMILIES)]
        variant = index // len(FAMILIES)
        quarter = variant % 4
        top = levels - 1
        center = min((2 * quarter + 1) * levels // 8, top)
        span = max(levels // 4, 1)

        if family == "constant":
            return {"family": family, "base": center, "amplitude": variant}
        if family == "stripes":
            low = center
            high = min(center + span, top) if quarter < 3 else max(center - span, 0)
            return {"family": family, "low": low, "high": high, "period": 2 + 2 * variant, "amplitude": 1}
        if family == "checker":
            low = min((2 * (quarter % 2) + 1) * levels // 8, top)
            high = min(low + 2 * span, top)
            return {"family": family, "low": low, "high": high, "period": 1 + variant, "amplitude": 1}
        return {
            "family": family,
            "center": center,
            "length": 1.0 + 0.5 * variant,
            "spread": 1.0 + (variant % 3) * 1.5
        }

    def render(self, recipe: Dict, size: int, levels: int, rng: np.random.Generator) -> np.ndarray:
        """Matriz fila-mayor (size x size) con intensidades en [0, levels)."""
        rows, cols = np.indices((size, size))
        family = recipe["family"]
        if family == "constant":
            amplitude = recipe["amplitude"]
            values = recipe["base"] + rng.integers(-amplitude, amplitude + 1, size=(size, size))
        elif family in ("stripes", "checker"):
            period = recipe["period"]
            if family == "stripes":
                phase = (cols // max(period // 2, 1)) % 2
            else:
                phase = (rows // period + cols // period) % 2
            amplitude = recipe["amplitude"]
            base = np.where(phase == 0, recipe["low"], recipe["high"])
            values = base + rng.integers(-amplitude, amplitude + 1, size=(size, size))
        elif family == "smooth":
            field = ndimage.gaussian_filter(rng.standard_normal((size, size)), sigma=recipe["length"], mode="wrap")
            field /= field.std() or 1.0
            values = np.rint(recipe["center"] + recipe["spread"] * field)
        else:
            raise DomainError(f"Familia de textura desconocida: {family}")
        return np.clip(values, 0, levels - 1).astype(np.int64)

    def generate_synthetic(self, spec: SynthSpec) -> Tuple[DatasetManifest, Dict[str, NdImage]]:
        """Corpus determinista: misma semilla -> mismos bytes."""
        if spec.size < 4:
            raise DomainError(f"Tamaño de imagen degenerado: {spec.size}")

        classes, images = [], {}
        for class_index in range(spec.class_count):
            recipe = self.class_recipe(class_index, spec.levels)
            label = f"c{class_index:02d}-{recipe['family']}"
            records = []
            for image_index in range(spec.per_class):
                rng = np.random.Generator(np.random.PCG64([spec.seed, class_index, image_index]))
                image = from_nested(self.render(recipe, spec.size, spec.levels, rng), spec.levels)
                image_id = f"{label}/img{image_index:02d}"
                images[image_id] = image
                records.append(ImageRecord(
                    id=image_id,
                    path=f"{image_id}.pgm",
                    dims=image.dims,
                    levels=image.levels
                ))
            classes.append(ClassImages(label=label, images=records))

        manifest = DatasetManifest(root="", classes=classes, generator=GENERATOR_ID)
        logger.info(
            f"Corpus sintético: {spec.class_count} clases x {spec.per_class} imágenes, "
            f"{spec.size}x{spec.size}, {spec.levels} niveles, semilla {spec.seed}"
        )
        return manifest, images

    def write_synthetic(self, spec: SynthSpec, root) -> DatasetManifest:
        """Escribe root/<clase>/<imagen>.pgm, manifest.json y provenance.json."""
        root = Path(root)
        manifest, images = self.generate_synthetic(spec)
        manifest = manifest.model_copy(update={"root": str(root)})
        for label, record in manifest.records:
            target = root / record.path
            target.parent.mkdir(parents=True, exist_ok=True)
            write_image(images[record.id], target)

        self.save_manifest(manifest, root / MANIFEST_NAME)
        provenance = {
            "spec": spec.model_dump(),
            "seed": spec.seed,
            "generator": GENERATOR_ID,
            "recipes": {
                group.label: self.class_recipe(position, spec.levels)
                for position, group in enumerate(manifest.classes)
            }
        }
        (root / "provenance.json").write_text(json.dumps(provenance, indent=2), encoding="utf-8")
        logger.info(f"Corpus sintético escrito en {root}")
        return manifest


# Instancia global del servicio
corpus_service = CorpusService()
