import itertools

import numpy as np

from app.core.cooccur import CoMatrix, DirectionPattern
from app.core.ndgrid import NdImage, from_array, get

WORKED_SLICES = [
    [[0, 0, 1], [0, 1, 2], [0, 2, 3]],
    [[1, 2, 3], [0, 2, 3], [0, 1, 2]],
    [[1, 3, 0], [0, 3, 1], [3, 2, 1]],
]

WORKED_GD = [[1, 3, 2, 1], [0, 0, 3, 1], [0, 1, 0, 3], [1, 1, 1, 0]]

WORKED_G_MINUS_D = [[1, 0, 0, 1], [3, 0, 1, 1], [2, 3, 0, 1], [1, 1, 3, 0]]


def random_image(rng: np.random.Generator, n: int = None) -> NdImage:
    """Imagen aleatoria: n en {1..4}, extensiones 2-8, niveles 2-8."""
    n = n or int(rng.integers(1, 5))
    dims = tuple(int(d) for d in rng.integers(2, 9, size=n))
    levels = int(rng.integers(2, 9))
    return from_array(rng.integers(0, levels, size=dims), levels)


def random_pattern(rng: np.random.Generator, n: int) -> DirectionPattern:
    while True:
        components = rng.integers(-1, 2, size=n)
        if components.any():
            return DirectionPattern(components=components.tolist())


def naive_glcm(image: NdImage, pattern: DirectionPattern, k: int) -> CoMatrix:
    """Contador de referencia: recorre todos los puntos y comprueba límites."""
    counts = np.zeros((image.levels, image.levels), dtype=np.int64)
    for point in itertools.product(*(range(extent) for extent in image.dims)):
        neighbour = tuple(x + k * c for x, c in zip(point, pattern.components))
        target = get(image, neighbour)
        if target is None:
            continue
        counts[get(image, point), target] += 1
    return CoMatrix(counts=counts)
