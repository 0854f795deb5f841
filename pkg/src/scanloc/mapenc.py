"""Overhead map patch encoding.

A patch enters as an 8-bit raster, is reduced to luminance in [0, 1], and
two grids come out of it:

* map_features: stride x stride windows summarized into 8 channels
  [mean luminance, luminance std, mean Sobel gradient magnitude, oriented
  edge energy in four bins (0/45/90/135 degrees), constant 0], then
  standardized per channel (zero mean, unit variance over all cells, same
  variance-floor rule as the BEV encoder).
* map_skeleton: Sobel magnitude thresholded at Otsu's level, thinned,
  max-pooled down to the feature resolution, and clamped into a
  two-channel probability mask.

edge_falloff turns a skeleton mask into a soft tolerance field (Gaussian
falloff of the distance to the nearest stroke) so that correlating scan
strokes against it credits near-misses instead of demanding cell-exact
overlap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .bev import SKELETON_EPS
from .errors import InputFormatError, InvalidArgumentError
from .geometry import Grid2D, SkeletonMask
from .io import read_image_gray
from .thinning import zhang_suen_thin

__all__ = [
    "MapPatch",
    "load_map",
    "map_features",
    "map_skeleton",
    "edge_falloff",
    "otsu_threshold",
    "sobel_gradients",
    "default_stride",
    "EDGE_CHANNEL",
    "FALLOFF_SIGMA",
]

# Index of the Sobel-magnitude channel in map_features output.
EDGE_CHANNEL = 2
# Width (in feature cells) of the stroke tolerance field.
FALLOFF_SIGMA = 1.0

# Rec. 601 luma weights.
_LUMA = (0.299, 0.587, 0.114)
_VARIANCE_FLOOR = 1e-6
_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = _SOBEL_X.T


@dataclass(frozen=True)
class MapPatch:
    """Square luminance raster in [0, 1]."""

    luminance: np.ndarray

    def __post_init__(self) -> None:
        lum = np.asarray(self.luminance, dtype=np.float64)
        if lum.ndim != 2:
            raise InputFormatError(f"patch luminance must be 2-D, got shape {lum.shape}")
        if lum.shape[0] != lum.shape[1]:
            raise InputFormatError(f"patch must be square, got shape {lum.shape}")
        if not np.all(np.isfinite(lum)) or lum.min() < 0 or lum.max() > 1:
            raise InputFormatError("patch luminance must lie in [0, 1]")
        lum.setflags(write=False)
        object.__setattr__(self, "luminance", lum)

    @property
    def size(self) -> int:
        return self.luminance.shape[0]

    @classmethod
    def from_rgb(cls, rgb: np.ndarray) -> "MapPatch":
        """Build a patch from an (H, W, 3) uint8 raster via Rec. 601."""
        arr = np.asarray(rgb, dtype=np.float64) / 255.0
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise InputFormatError(f"expected (H, W, 3) RGB raster, got shape {arr.shape}")
        lum = _LUMA[0] * arr[:, :, 0] + _LUMA[1] * arr[:, :, 1] + _LUMA[2] * arr[:, :, 2]
        return cls(lum)

    @classmethod
    def from_gray(cls, gray: np.ndarray) -> "MapPatch":
        """Build a patch from an (H, W) uint8 raster."""
        arr = np.asarray(gray, dtype=np.float64)
        if arr.ndim != 2:
            raise InputFormatError(f"expected (H, W) grayscale raster, got shape {arr.shape}")
        return cls(arr / 255.0)


def load_map(path: str | Path) -> MapPatch:
    """Load a PNG or PGM patch and reduce it to [0, 1] luminance."""
    raster = read_image_gray(path)
    if raster.ndim == 3:
        return MapPatch.from_rgb(raster)
    return MapPatch.from_gray(raster)


def default_stride(patch_size: int) -> int:
    """Feature stride used for the standard patch sizes (4 at 256, 8 at 1024)."""
    return 8 if patch_size >= 1024 else 4


def sobel_gradients(lum: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel derivatives (gx along columns, gy along rows), reflect
    border handling."""
    gx = ndimage.correlate(lum, _SOBEL_X, mode="reflect")
    gy = ndimage.correlate(lum, _SOBEL_Y, mode="reflect")
    return gx, gy


def otsu_threshold(values: np.ndarray, bins: int = 256) -> float:
    """Otsu's threshold of a nonnegative value image.

    Returns a level t such that `values > t` separates the two classes;
    for a constant image t equals that constant (nothing is foreground).
    """
    vals = np.asarray(values, dtype=np.float64).ravel()
    if vals.size == 0:
        raise InvalidArgumentError("cannot threshold an empty array")
    lo, hi = float(vals.min()), float(vals.max())
    if hi <= lo:
        return lo
    hist, edges = np.histogram(vals, bins=bins, range=(lo, hi))
    hist = hist.astype(np.float64)
    centers = (edges[:-1] + edges[1:]) / 2.0
    weight = hist.cumsum()
    total = weight[-1]
    mean = (hist * centers).cumsum()
    w0 = weight[:-1]
    w1 = total - w0
    valid = (w0 > 0) & (w1 > 0)
    mu0 = np.where(w0 > 0, mean[:-1] / np.maximum(w0, 1), 0.0)
    mu1 = np.where(w1 > 0, (mean[-1] - mean[:-1]) / np.maximum(w1, 1), 0.0)
    between = np.where(valid, w0 * w1 * (mu0 - mu1) ** 2, -np.inf)
    k = int(np.argmax(between))
    # Split between bin k and k+1.
    return float(edges[k + 1])


def _window_mean(img: np.ndarray, stride: int) -> np.ndarray:
    h, w = img.shape
    return img.reshape(h // stride, stride, w // stride, stride).mean(axis=(1, 3))


def map_features(patch: MapPatch, stride: int | None = None, channels: int = 8) -> Grid2D:
    """Summarize a patch into a stride-downsampled 8-channel feature grid.

    Args:
        patch: luminance raster, size divisible by the stride.
        stride: window edge in pixels; defaults per patch size.
        channels: output channel count, at least 8; extras stay zero.
    """
    if channels < 8:
        raise InvalidArgumentError(f"need at least 8 channels, got {channels}")
    if stride is None:
        stride = default_stride(patch.size)
    if stride < 1 or patch.size % stride != 0:
        raise InvalidArgumentError(f"patch size {patch.size} not divisible by stride {stride}")

    lum = patch.luminance
    gx, gy = sobel_gradients(lum)
    mag = np.hypot(gx, gy)
    energy = gx * gx + gy * gy
    # Edge orientation: gradient angle + 90 degrees, folded to [0, pi).
    orient = np.mod(np.arctan2(gy, gx) + math.pi / 2.0, math.pi)
    bin_idx = np.mod(np.rint(orient / (math.pi / 4.0)).astype(np.int64), 4)

    n = patch.size // stride
    feat = np.zeros((n, n, channels), dtype=np.float64)
    feat[:, :, 0] = _window_mean(lum, stride)
    sq_mean = _window_mean(lum * lum, stride)
    feat[:, :, 1] = np.sqrt(np.maximum(sq_mean - feat[:, :, 0] ** 2, 0.0))
    feat[:, :, 2] = _window_mean(mag, stride)
    for b in range(4):
        feat[:, :, 3 + b] = _window_mean(np.where(bin_idx == b, energy, 0.0), stride)

    for ch in range(channels):
        vals = feat[:, :, ch]
        var = vals.var()
        if var < _VARIANCE_FLOOR:
            continue
        feat[:, :, ch] = (vals - vals.mean()) / math.sqrt(var)
    return Grid2D(feat)


def map_skeleton(patch: MapPatch, stride: int | None = None, eps: float = SKELETON_EPS) -> SkeletonMask:
    """Edge skeleton of a patch at feature resolution.

    Sobel magnitude is binarized at Otsu's threshold, thinned, max-pooled
    over stride windows and clamped into the two-channel probability form
    (channel 1 = skeleton, channel 0 = complement).
    """
    if stride is None:
        stride = default_stride(patch.size)
    if stride < 1 or patch.size % stride != 0:
        raise InvalidArgumentError(f"patch size {patch.size} not divisible by stride {stride}")
    if not 0 < eps < 0.5:
        raise InvalidArgumentError(f"eps must be in (0, 0.5), got {eps!r}")

    gx, gy = sobel_gradients(patch.luminance)
    mag = np.hypot(gx, gy)
    edges = (mag > otsu_threshold(mag)).astype(np.uint8)
    thin = zhang_suen_thin(edges)
    n = patch.size // stride
    pooled = thin.reshape(n, stride, n, stride).max(axis=(1, 3)).astype(np.float64)
    prob = np.clip(pooled, eps, 1.0 - eps)
    return Grid2D(np.stack([1.0 - prob, prob], axis=-1))


def edge_falloff(mask: SkeletonMask, sigma: float = FALLOFF_SIGMA) -> SkeletonMask:
    """Soft tolerance field around the strokes of a skeleton mask.

    Channel 1 becomes exp(-d^2 / (2 sigma^2)) of each cell's Euclidean
    distance to the nearest stroke (1 on strokes, decaying off them);
    channel 0 stays the complement. A stroke template correlated against
    the field earns nearly full credit when it lands within about sigma
    cells of a map stroke, which absorbs rasterization offsets between
    the two modalities.
    """
    if mask.channels != 2:
        raise InvalidArgumentError(f"skeleton mask must have 2 channels, got {mask.channels}")
    if not (math.isfinite(sigma) and sigma > 0):
        raise InvalidArgumentError(f"sigma must be positive, got {sigma!r}")
    off = ndimage.distance_transform_edt(mask.channel(1) <= 0.5)
    f = np.exp(-(off**2) / (2.0 * sigma * sigma))
    return Grid2D(np.stack([1.0 - f, f], axis=-1), cell_size=mask.cell_size)
