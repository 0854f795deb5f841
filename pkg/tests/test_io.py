import numpy as np
import pytest

from scanloc.errors import InputFormatError
from scanloc.geometry import PointCloud
from scanloc.io import (
    read_image_gray,
    read_points_bin,
    read_points_csv,
    write_image_gray,
    write_points_bin,
    write_points_csv,
)


@pytest.fixture
def cloud():
    rng = np.random.default_rng(7)
    return PointCloud(rng.normal(size=(40, 3)) * 10)


def test_bin_round_trip(tmp_path, cloud):
    path = tmp_path / "scan.bin"
    write_points_bin(cloud, path)
    back = read_points_bin(path)
    # float32 storage: round trip within single precision.
    assert np.allclose(back.points, cloud.points, atol=1e-4)
    assert path.stat().st_size == 12 * len(cloud)


def test_bin_rejects_truncated(tmp_path):
    path = tmp_path / "scan.bin"
    path.write_bytes(b"\x00" * 13)
    with pytest.raises(InputFormatError):
        read_points_bin(path)


def test_csv_round_trip(tmp_path, cloud):
    path = tmp_path / "scan.csv"
    write_points_csv(cloud, path)
    back = read_points_csv(path)
    assert np.array_equal(back.points, cloud.points)


def test_csv_requires_header(tmp_path):
    path = tmp_path / "scan.csv"
    path.write_text("1,2,3\n4,5,6\n")
    with pytest.raises(InputFormatError):
        read_points_csv(path)


def test_csv_rejects_bad_row(tmp_path):
    path = tmp_path / "scan.csv"
    path.write_text("x,y,z\n1,2\n")
    with pytest.raises(InputFormatError):
        read_points_csv(path)


def test_missing_file_named_in_error(tmp_path):
    missing = tmp_path / "nope.bin"
    with pytest.raises(InputFormatError, match="nope.bin"):
        read_points_bin(missing)


@pytest.mark.parametrize("ext", ["png", "pgm"])
def test_gray_image_round_trip(tmp_path, ext):
    img = np.arange(64, dtype=np.uint8).reshape(8, 8) * 3
    path = tmp_path / f"img.{ext}"
    write_image_gray(img, path)
    assert np.array_equal(read_image_gray(path), img)


def test_unreadable_image_rejected(tmp_path):
    path = tmp_path / "bad.png"
    path.write_bytes(b"not a png at all")
    with pytest.raises(InputFormatError):
        read_image_gray(path)
