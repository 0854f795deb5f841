"""Bird's-eye-view encoding of LiDAR point clouds.

A cloud is binned into vertical pillars on a fixed metric grid, each
pillar keeps at most a capped number of points (random uniform downsample,
seeded), and per-pillar statistics become an 8-channel feature grid:

    0: occupancy (1 where the pillar holds any point)
    1: log(1 + point count)
    2: min z        3: max z        4: mean z       5: z span
    6: radial distance of the cell center, normalized by the half extent
    7: constant 0 (reserved)

Channels are finally standardized per channel to zero mean / unit variance
over occupied cells; a channel whose variance over occupied cells falls
below a 1e-6 floor is left as computed (standardizing a constant channel
would only erase it). Empty cells stay exactly 0 in every channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .geometry import Grid2D, PointCloud, SkeletonMask
from .thinning import zhang_suen_thin

__all__ = [
    "VoxelConfig",
    "PillarGrid",
    "voxelize",
    "encode_bev",
    "bev_skeleton",
    "CHANNEL_COUNT",
    "SKELETON_EPS",
]

CHANNEL_COUNT = 8
SKELETON_EPS = 1e-4
_VARIANCE_FLOOR = 1e-6


@dataclass(frozen=True)
class VoxelConfig:
    """Pillar grid geometry: cell sizes and inclusive-exclusive ranges.

    Each range must divide into a whole number of cells.
    """

    pillar_size: tuple[float, float, float] = (2.0, 2.0, 30.0)
    range_x: tuple[float, float] = (-100.0, 100.0)
    range_y: tuple[float, float] = (-100.0, 100.0)
    range_z: tuple[float, float] = (-10.0, 20.0)
    max_points_per_voxel: int = 128

    def __post_init__(self) -> None:
        if len(self.pillar_size) != 3 or any(s <= 0 for s in self.pillar_size):
            raise InvalidArgumentError(f"pillar_size must be 3 positive extents, got {self.pillar_size!r}")
        for name, (lo, hi), cell in (
            ("range_x", self.range_x, self.pillar_size[0]),
            ("range_y", self.range_y, self.pillar_size[1]),
            ("range_z", self.range_z, self.pillar_size[2]),
        ):
            if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
                raise InvalidArgumentError(f"{name} must be an ordered finite interval, got {(lo, hi)!r}")
            cells = (hi - lo) / cell
            if abs(cells - round(cells)) > 1e-9:
                raise InvalidArgumentError(
                    f"{name} extent {hi - lo} does not divide into whole cells of {cell}"
                )
        if self.max_points_per_voxel < 1:
            raise InvalidArgumentError(f"max_points_per_voxel must be >= 1, got {self.max_points_per_voxel}")

    @property
    def grid_shape(self) -> tuple[int, int]:
        """(rows, cols): rows bin x (forward), cols bin y (left)."""
        h = round((self.range_x[1] - self.range_x[0]) / self.pillar_size[0])
        w = round((self.range_y[1] - self.range_y[0]) / self.pillar_size[1])
        return int(h), int(w)


@dataclass(frozen=True)
class PillarGrid:
    """Sparse pillar container: retained points per occupied cell."""

    height: int
    width: int
    pillars: dict[tuple[int, int], np.ndarray] = field(repr=False)
    config: VoxelConfig = field(default_factory=VoxelConfig)

    def total_points(self) -> int:
        return sum(p.shape[0] for p in self.pillars.values())


def voxelize(cloud: PointCloud, config: VoxelConfig, seed: int = 0) -> PillarGrid:
    """Bin a cloud into pillars.

    Points outside the configured x/y/z ranges are dropped (ranges are
    half-open: min inclusive, max exclusive). Pillars holding more than
    max_points_per_voxel points are downsampled uniformly at random with
    the given seed; identical inputs and seed give identical output.
    """
    h, w = config.grid_shape
    pts = cloud.points
    dx, dy, _ = config.pillar_size
    (x0, x1), (y0, y1), (z0, z1) = config.range_x, config.range_y, config.range_z

    if len(pts) == 0:
        return PillarGrid(height=h, width=w, pillars={}, config=config)

    keep = (
        (pts[:, 0] >= x0) & (pts[:, 0] < x1)
        & (pts[:, 1] >= y0) & (pts[:, 1] < y1)
        & (pts[:, 2] >= z0) & (pts[:, 2] < z1)
    )
    pts = pts[keep]
    if len(pts) == 0:
        return PillarGrid(height=h, width=w, pillars={}, config=config)
    rows = np.floor((pts[:, 0] - x0) / dx).astype(np.int64)
    cols = np.floor((pts[:, 1] - y0) / dy).astype(np.int64)
    # Float-edge safety: a coordinate a hair under the max can still floor
    # onto the last cell boundary.
    np.clip(rows, 0, h - 1, out=rows)
    np.clip(cols, 0, w - 1, out=cols)

    flat = rows * w + cols
    order = np.argsort(flat, kind="stable")
    flat_sorted = flat[order]
    cut = np.flatnonzero(np.diff(flat_sorted)) + 1
    groups = np.split(order, cut)

    rng = np.random.default_rng(seed)
    cap = config.max_points_per_voxel
    pillars: dict[tuple[int, int], np.ndarray] = {}
    for grp in groups:
        r, c = divmod(int(flat[grp[0]]), w)
        if len(grp) > cap:
            pick = rng.choice(len(grp), size=cap, replace=False)
            pick.sort()
            grp = grp[pick]
        stored = np.array(pts[grp], dtype=np.float64)
        stored.setflags(write=False)
        pillars[(int(r), int(c))] = stored
    return PillarGrid(height=h, width=w, pillars=pillars, config=config)


def encode_bev(grid: PillarGrid, channels: int = CHANNEL_COUNT, standardize: bool = True) -> Grid2D:
    """Turn a pillar grid into the 8-channel feature grid described in the
    module docstring.

    Args:
        grid: voxelized cloud.
        channels: output channel count, at least 8; extras stay zero.
        standardize: apply the per-channel standardization over occupied
            cells. Disable to inspect raw statistics.

    Returns:
        Grid2D of shape (H, W, channels) with cell_size = pillar x extent.
    """
    if channels < CHANNEL_COUNT:
        raise InvalidArgumentError(f"need at least {CHANNEL_COUNT} channels, got {channels}")
    cfg = grid.config
    dx, dy, _ = cfg.pillar_size
    feat = np.zeros((grid.height, grid.width, channels), dtype=np.float64)

    half_extent = max(abs(cfg.range_x[0]), abs(cfg.range_x[1]),
                      abs(cfg.range_y[0]), abs(cfg.range_y[1]))
    for (r, c), pts in grid.pillars.items():
        z = pts[:, 2]
        cx = cfg.range_x[0] + (r + 0.5) * dx
        cy = cfg.range_y[0] + (c + 0.5) * dy
        feat[r, c, 0] = 1.0
        feat[r, c, 1] = math.log1p(pts.shape[0])
        feat[r, c, 2] = z.min()
        feat[r, c, 3] = z.max()
        feat[r, c, 4] = z.mean()
        feat[r, c, 5] = z.max() - z.min()
        feat[r, c, 6] = math.hypot(cx, cy) / half_extent

    if standardize and grid.pillars:
        occ_r, occ_c = zip(*grid.pillars.keys())
        occ_idx = (np.asarray(occ_r), np.asarray(occ_c))
        for ch in range(channels):
            vals = feat[occ_idx + (ch,)]
            var = vals.var()
            if var < _VARIANCE_FLOOR:
                continue
            feat[occ_idx + (ch,)] = (vals - vals.mean()) / math.sqrt(var)
    return Grid2D(feat, cell_size=dx)


def bev_skeleton(f: Grid2D, eps: float = SKELETON_EPS) -> SkeletonMask:
    """Thin the occupancy channel of a BEV feature grid into a two-channel
    probability mask.

    Channel 1 holds the skeleton indicator clamped to [eps, 1 - eps];
    channel 0 is its complement, so the two channels sum to 1 per cell.
    """
    if f.channels < 1:
        raise InvalidArgumentError("feature grid has no occupancy channel")
    if not 0 < eps < 0.5:
        raise InvalidArgumentError(f"eps must be in (0, 0.5), got {eps!r}")
    occ = f.channel(0) > 0
    skel = zhang_suen_thin(occ.astype(np.uint8)).astype(np.float64)
    prob = np.clip(skel, eps, 1.0 - eps)
    mask = np.stack([1.0 - prob, prob], axis=-1)
    return Grid2D(mask, cell_size=f.cell_size)
