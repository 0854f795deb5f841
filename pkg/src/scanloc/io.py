"""File formats: point cloud records and 8-bit raster images.

Point clouds travel either as packed little-endian binary (three float32
per point, x y z) or as CSV with an `x,y,z` header row. Images are PNG or
PGM, written through Pillow.
"""

from __future__ import annotations

import csv
import io as _stdio
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import InputFormatError
from .geometry import PointCloud

__all__ = [
    "read_points_bin",
    "write_points_bin",
    "read_points_csv",
    "write_points_csv",
    "read_image_gray",
    "write_image_gray",
]

_RECORD_BYTES = 12  # three little-endian float32


def write_points_bin(cloud: PointCloud, path: str | Path) -> None:
    """Write a cloud as packed little-endian float32 x,y,z records."""
    data = np.ascontiguousarray(cloud.points, dtype="<f4")
    Path(path).write_bytes(data.tobytes())


def read_points_bin(path: str | Path) -> PointCloud:
    """Read a packed binary point cloud written by write_points_bin."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise InputFormatError(f"cannot read point cloud {path}: {exc}") from exc
    if len(raw) % _RECORD_BYTES != 0:
        raise InputFormatError(
            f"{path}: length {len(raw)} is not a multiple of {_RECORD_BYTES}-byte records"
        )
    pts = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(-1, 3)
    return PointCloud(pts)


def write_points_csv(cloud: PointCloud, path: str | Path) -> None:
    """Write a cloud as CSV with an x,y,z header."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z"])
        for x, y, z in cloud.points:
            writer.writerow([repr(float(x)), repr(float(y)), repr(float(z))])


def read_points_csv(path: str | Path) -> PointCloud:
    """Read a CSV point cloud; the header row must be exactly x,y,z."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputFormatError(f"cannot read point cloud {path}: {exc}") from exc
    reader = csv.reader(_stdio.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise InputFormatError(f"{path}: empty CSV, expected x,y,z header") from None
    if [h.strip().lower() for h in header] != ["x", "y", "z"]:
        raise InputFormatError(f"{path}: expected header x,y,z, got {header!r}")
    rows = []
    for i, row in enumerate(reader):
        if not row:
            continue
        if len(row) != 3:
            raise InputFormatError(f"{path}: row {i + 2} has {len(row)} fields, expected 3")
        try:
            rows.append([float(c) for c in row])
        except ValueError as exc:
            raise InputFormatError(f"{path}: row {i + 2} is not numeric: {row!r}") from exc
    pts = np.asarray(rows, dtype=np.float64).reshape(-1, 3)
    return PointCloud(pts)


def write_image_gray(values: np.ndarray, path: str | Path) -> None:
    """Write a uint8 grayscale raster as PNG or PGM (picked by extension)."""
    arr = np.asarray(values)
    if arr.dtype != np.uint8:
        raise InputFormatError(f"grayscale writer expects uint8, got {arr.dtype}")
    if arr.ndim != 2:
        raise InputFormatError(f"grayscale writer expects a 2-D array, got shape {arr.shape}")
    Image.fromarray(arr, mode="L").save(Path(path))


def read_image_gray(path: str | Path) -> np.ndarray:
    """Read a PNG or PGM raster; RGB inputs are returned as (H, W, 3) uint8,
    grayscale as (H, W) uint8."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode in ("L", "I;16", "I"):
                return np.asarray(img.convert("L"), dtype=np.uint8)
            if img.mode in ("RGB", "RGBA", "P"):
                return np.asarray(img.convert("RGB"), dtype=np.uint8)
            raise InputFormatError(f"{path}: unsupported image mode {img.mode}")
    except (OSError, UnidentifiedImageError) as exc:
        raise InputFormatError(f"cannot read image {path}: {exc}") from exc
