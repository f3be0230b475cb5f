"""
Lectura y escritura de imágenes.

- PGM binario (P5) y ASCII (P2): levels = maxval + 1. Se decodifica aquí
  porque Pillow reescala a 0..255 los archivos con maxval != 255.
- PNG en escala de grises de 8 o 16 bits (Pillow).
- Formato crudo n-D: cabecera de texto `.ndh` con líneas `clave = valor`
  (dims, levels, data) y un archivo binario little-endian con el eje 0
  variando más rápido (uint8 si levels <= 256, uint16 si no).
"""
import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from app.core.ndgrid import NdImage, from_nested
from app.utils.exceptions import ImageFormatError, NdGlcmError

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".pgm", ".png", ".ndh")

_PGM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*(\S+)")


def _pgm_header(buffer: bytes, path) -> Tuple[bytes, List[int], int]:
    """Devuelve (magic, [ancho, alto, maxval], offset del primer byte de datos)."""
    tokens, offset = [], 0
    for _ in range(4):
        match = _PGM_TOKEN.match(buffer, offset)
        if match is None:
            raise ImageFormatError(path, "cabecera PGM incompleta")
        tokens.append(match.group(1))
        offset = match.end()
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise ImageFormatError(path, f"no es un PGM en escala de grises (magic {magic!r})")
    try:
        width, height, maxval = (int(token) for token in tokens[1:])
    except ValueError:
        raise ImageFormatError(path, "cabecera PGM con valores no numéricos")
    if width < 1 or height < 1 or not 1 <= maxval <= 65535:
        raise ImageFormatError(path, f"cabecera PGM inválida: {width}x{height}, maxval {maxval}")
    # P5: exactamente un blanco separa la cabecera de los datos
    return magic, [width, height, maxval], offset + 1


def read_pgm(path) -> NdImage:
    path = Path(path)
    buffer = path.read_bytes()
    magic, (width, height, maxval), offset = _pgm_header(buffer, path)
    count = width * height

    if magic == b"P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        payload = buffer[offset:offset + count * dtype.itemsize]
        if len(payload) != count * dtype.itemsize:
            raise ImageFormatError(path, f"datos truncados: se esperaban {count} píxeles")
        values = np.frombuffer(payload, dtype=dtype).astype(np.int64)
    else:
        body = re.sub(rb"#[^\n]*", b"", buffer[offset - 1:])
        try:
            values = np.array(body.split(), dtype=np.int64)
        except ValueError:
            raise ImageFormatError(path, "datos ASCII no numéricos")
        if values.size != count:
            raise ImageFormatError(path, f"se esperaban {count} píxeles, hay {values.size}")

    if values.size and values.max() > maxval:
        raise ImageFormatError(path, f"intensidad {values.max()} mayor que maxval {maxval}")
    return from_nested(values.reshape(height, width), levels=maxval + 1)


def write_pgm(image: NdImage, path) -> None:
    """Exporta una imagen 2-D como PGM binario (P5) con maxval = levels - 1."""
    if image.ndim != 2:
        raise ImageFormatError(path, f"PGM sólo admite imágenes 2-D, no {image.ndim}-D")
    if image.levels < 2:
        raise ImageFormatError(path, "PGM necesita al menos 2 niveles (maxval >= 1)")
    width, height = image.dims
    maxval = image.levels - 1
    dtype = ">u2" if maxval > 255 else "u1"
    header = f"P5\n{width} {height}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + image.to_nested().astype(dtype).tobytes())


def read_png(path) -> NdImage:
    path = Path(path)
    try:
        with Image.open(path) as picture:
            mode = picture.mode
            pixels = np.array(picture)
    except (UnidentifiedImageError, OSError) as e:
        raise ImageFormatError(path, f"PNG ilegible: {e}")

    if mode == "L":
        levels = 256
    elif mode in ("I;16", "I;16B", "I"):
        levels = 65536
    elif mode == "1":
        levels = 2
        pixels = pixels.astype(np.uint8)
    else:
        raise ImageFormatError(path, f"sólo se admiten PNG en escala de grises (modo {mode})")
    if pixels.ndim != 2:
        raise ImageFormatError(path, f"se esperaba una imagen 2-D, forma {pixels.shape}")
    return from_nested(pixels.astype(np.int64), levels=levels)


def _parse_header(path: Path) -> Dict[str, str]:
    fields = {}
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ImageFormatError(path, f"línea {number} sin '=': {line}")
        key, value = line.split("=", 1)
        fields[key.strip().lower()] = value.strip()
    missing = {"dims", "levels", "data"} - fields.keys()
    if missing:
        raise ImageFormatError(path, f"faltan campos en la cabecera: {sorted(missing)}")
    return fields


def _raw_dtype(levels: int) -> np.dtype:
    return np.dtype("u1") if levels <= 256 else np.dtype("<u2")


def read_raw(header_path) -> NdImage:
    header_path = Path(header_path)
    fields = _parse_header(header_path)
    try:
        dims = tuple(int(token) for token in fields["dims"].replace(",", " ").split())
        levels = int(fields["levels"])
    except ValueError:
        raise ImageFormatError(header_path, "dims/levels no numéricos")

    data_path = header_path.parent / fields["data"]
    if not data_path.is_file():
        raise ImageFormatError(data_path, "archivo de vóxeles inexistente")
    values = np.fromfile(data_path, dtype=_raw_dtype(levels))
    try:
        return NdImage(dims=dims, levels=levels, data=values)
    except NdGlcmError as e:
        raise ImageFormatError(header_path, str(e))


def write_raw(image: NdImage, header_path, data_name: Optional[str] = None) -> Path:
    """Escribe cabecera + vóxeles; devuelve la ruta del archivo binario."""
    header_path = Path(header_path)
    data_name = data_name or header_path.with_suffix(".raw").name
    data_path = header_path.parent / data_name
    image.data.astype(_raw_dtype(image.levels)).tofile(data_path)
    header_path.write_text(
        f"dims = {' '.join(str(extent) for extent in image.dims)}\n"
        f"levels = {image.levels}\n"
        f"data = {data_name}\n",
        encoding="utf-8"
    )
    return data_path


def read_image(path) -> NdImage:
    """Lee cualquier formato admitido según la extensión."""
    path = Path(path)
    suffix = path.suffix.lower()
    try:
        if suffix == ".pgm":
            return read_pgm(path)
        if suffix == ".png":
            return read_png(path)
        if suffix == ".ndh":
            return read_raw(path)
    except ImageFormatError:
        raise
    except NdGlcmError as e:
        raise ImageFormatError(path, str(e))
    except OSError as e:
        raise ImageFormatError(path, f"no se pudo leer: {e}")
    raise ImageFormatError(path, f"extensión no admitida '{suffix}' (use {', '.join(IMAGE_SUFFIXES)})")


def write_image(image: NdImage, path) -> None:
    """PGM para imágenes 2-D, formato crudo para el resto."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        write_pgm(image, path)
    elif path.suffix.lower() == ".ndh":
        write_raw(image, path)
    else:
        raise ImageFormatError(path, "sólo se escriben .pgm y .ndh")
