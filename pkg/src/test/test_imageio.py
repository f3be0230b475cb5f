import numpy as np
import pytest
from PIL import Image

from app.core.imageio import read_image, read_pgm, read_png, read_raw, write_image, write_pgm, write_raw
from app.core.ndgrid import from_array, from_nested
from app.utils.exceptions import ImageFormatError


def test_ascii_pgm_with_comments(tmp_path):
    path = tmp_path / "small.pgm"
    path.write_bytes(b"P2\n# creado a mano\n3 2\n3\n0 1 2\n3 2 1\n")
    image = read_pgm(path)
    assert image.dims == (3, 2)
    assert image.levels == 4
    assert image.to_nested().tolist() == [[0, 1, 2], [3, 2, 1]]


def test_binary_pgm_keeps_levels(tmp_path, rng):
    image = from_nested(rng.integers(0, 32, size=(5, 7)), levels=32)
    path = tmp_path / "img.pgm"
    write_pgm(image, path)
    assert path.read_bytes().startswith(b"P5\n7 5\n31\n")
    assert read_image(path) == image


def test_sixteen_bit_pgm(tmp_path, rng):
    image = from_nested(rng.integers(0, 1024, size=(4, 4)), levels=1024)
    path = tmp_path / "deep.pgm"
    write_pgm(image, path)
    assert read_pgm(path) == image


def test_truncated_pgm(tmp_path):
    path = tmp_path / "short.pgm"
    path.write_bytes(b"P5\n4 4\n255\n" + bytes(10))
    with pytest.raises(ImageFormatError, match="short.pgm"):
        read_pgm(path)


def test_pgm_value_above_maxval(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_bytes(b"P2\n2 1\n3\n0 9\n")
    with pytest.raises(ImageFormatError):
        read_pgm(path)


def test_pgm_only_for_2d(tmp_path, worked_volume):
    with pytest.raises(ImageFormatError):
        write_pgm(worked_volume, tmp_path / "volume.pgm")


def test_pgm_needs_two_levels(tmp_path):
    with pytest.raises(ImageFormatError, match="2 niveles"):
        write_pgm(from_nested(np.zeros((3, 3), dtype=int), levels=1), tmp_path / "flat.pgm")
    assert not (tmp_path / "flat.pgm").exists()


def test_png_grayscale(tmp_path, rng):
    pixels = rng.integers(0, 256, size=(6, 5)).astype(np.uint8)
    path = tmp_path / "gray.png"
    Image.fromarray(pixels).save(path)
    image = read_png(path)
    assert image.levels == 256
    assert np.array_equal(image.to_nested(), pixels)


def test_png_sixteen_bit(tmp_path):
    pixels = np.array([[0, 40000], [65535, 7]], dtype=np.uint16)
    path = tmp_path / "deep.png"
    Image.fromarray(pixels).save(path)
    image = read_image(path)
    assert image.levels == 65536
    assert image.to_nested().tolist() == pixels.tolist()


def test_png_color_rejected(tmp_path):
    path = tmp_path / "color.png"
    Image.new("RGB", (3, 3)).save(path)
    with pytest.raises(ImageFormatError, match="escala de grises"):
        read_png(path)


def test_raw_volume(tmp_path, worked_volume):
    header = tmp_path / "volume.ndh"
    data_path = write_raw(worked_volume, header)
    assert data_path.name == "volume.raw"
    assert "dims = 3 3 3" in header.read_text()
    assert read_image(header) == worked_volume


def test_raw_wide_levels(tmp_path, rng):
    image = from_array(rng.integers(0, 1000, size=(2, 3, 2)), levels=1000)
    header = tmp_path / "wide.ndh"
    write_image(image, header)
    assert read_raw(header) == image


def test_raw_missing_field(tmp_path):
    header = tmp_path / "broken.ndh"
    header.write_text("dims = 2 2\nlevels = 2\n")
    with pytest.raises(ImageFormatError, match="data"):
        read_raw(header)


def test_raw_truncated_data(tmp_path):
    header = tmp_path / "short.ndh"
    header.write_text("dims = 2 2\nlevels = 2\ndata = short.raw\n")
    (tmp_path / "short.raw").write_bytes(bytes([0, 1, 1]))
    with pytest.raises(ImageFormatError):
        read_image(header)


def test_unsupported_suffix(tmp_path):
    path = tmp_path / "image.bmp"
    path.write_bytes(b"BM")
    with pytest.raises(ImageFormatError, match="extensión"):
        read_image(path)


def test_missing_file(tmp_path):
    with pytest.raises(ImageFormatError):
        read_image(tmp_path / "absent.pgm")
