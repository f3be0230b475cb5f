import numpy as np
import pytest

from app.core.ndgrid import MAX_LEVELS, NdImage, from_array, from_nested, from_slices, get, quantize
from app.utils.exceptions import DomainError, ShapeError


def test_from_slices_axes(worked_volume):
    assert worked_volume.dims == (3, 3, 3)
    assert worked_volume.levels == 4
    # columna 2, fila 0, corte 0
    assert get(worked_volume, (2, 0, 0)) == 1
    assert get(worked_volume, (0, 0, 0)) == 0
    assert get(worked_volume, (2, 2, 2)) == 1
    assert get(worked_volume, (1, 0, 2)) == 3


def test_get_out_of_bounds(worked_volume):
    assert get(worked_volume, (3, 0, 0)) is None
    assert get(worked_volume, (0, -1, 0)) is None


def test_get_arity_mismatch(worked_volume):
    with pytest.raises(ShapeError):
        get(worked_volume, (0, 0))


def test_single_point_volume():
    image = from_slices([[[0]]], levels=1)
    assert image.dims == (1, 1, 1)
    assert image.data.tolist() == [0]


def test_two_slices_flat_layout():
    image = from_slices([[[0, 1], [1, 0]], [[1, 0], [0, 1]]], levels=2)
    assert image.dims == (2, 2, 2)
    assert image.data.tolist() == [0, 1, 1, 0, 1, 0, 0, 1]


def test_ragged_rows_rejected():
    with pytest.raises(ShapeError):
        from_nested([[0, 1], [1]], levels=2)


def test_slices_of_different_shape_rejected():
    with pytest.raises(ShapeError):
        from_slices([[[0, 1]], [[0], [1]]], levels=2)


def test_intensity_out_of_range():
    with pytest.raises(DomainError):
        from_nested([[0, 4]], levels=4)
    with pytest.raises(DomainError):
        from_nested([[-1, 0]], levels=4)


def test_levels_limits():
    with pytest.raises(DomainError):
        from_nested([[0]], levels=0)
    with pytest.raises(DomainError):
        from_nested([[0]], levels=MAX_LEVELS + 1)
    assert from_nested([[MAX_LEVELS - 1]], levels=MAX_LEVELS).levels == MAX_LEVELS


def test_data_length_must_match_dims():
    with pytest.raises(ShapeError):
        NdImage(dims=(2, 2), levels=2, data=[0, 1, 1])


def test_image_is_immutable(checkerboard):
    with pytest.raises(ValueError):
        checkerboard.data[0] = 1


def test_from_array_matches_get(rng):
    array = rng.integers(0, 5, size=(4, 3, 2))
    image = from_array(array, levels=5)
    for point in np.ndindex(*array.shape):
        assert get(image, point) == array[point]
    assert np.array_equal(image.array, array)


def test_nested_roundtrip(worked_volume):
    assert from_nested(worked_volume.to_nested(), levels=4) == worked_volume


@pytest.mark.parametrize("value, expected", [(0, 0), (7, 0), (8, 1), (255, 31)])
def test_quantize_256_to_32(value, expected):
    image = from_nested([[value]], levels=256)
    assert quantize(image, 32).data.tolist() == [expected]


def test_quantize_identity(worked_volume):
    assert quantize(worked_volume, 4) == worked_volume


def test_quantize_is_monotone_and_surjective():
    image = from_nested([list(range(256))], levels=256)
    values = quantize(image, 32).data.astype(int)
    assert np.all(np.diff(values) >= 0)
    assert set(values.tolist()) == set(range(32))


def test_quantize_invalid_target(checkerboard):
    with pytest.raises(DomainError):
        quantize(checkerboard, 0)


@pytest.mark.parametrize("value, expected", [(0, 0), (128, 2), (255, 3)])
def test_quantize_256_to_4(value, expected):
    image = from_nested([[value]], levels=256)
    assert quantize(image, 4).data.tolist() == [expected]
