"""Core planar geometry: poses, grids, point clouds and the transforms
between them.

Conventions used throughout the package:

* A pose (u, v, theta) places the center of a scan-aligned grid at map
  grid column u, row v, rotated by theta radians. Angles live in
  (-pi, pi], wrapped on construction.
* theta = 0 means the scan grid's +row axis aligns with the map's +v
  (row) axis; positive theta turns counterclockwise in the (u, v) plane.
* Grids are row-major (row, col, channel). A grid's rotation center is
  its geometric center cell ((H-1)/2, (W-1)/2).
* Point clouds are in the sensor frame: x forward, y left, z up, meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "Pose",
    "Grid2D",
    "PointCloud",
    "wrap_angle",
    "apply_pose",
    "pose_error",
    "center_crop",
]


def wrap_angle(theta: float) -> float:
    """Wrap an angle in radians to the interval (-pi, pi].

    Examples
    --------
    >>> wrap_angle(0.0)
    0.0
    >>> wrap_angle(3 * math.pi / 2) == -math.pi / 2
    True
    >>> wrap_angle(-math.pi) == math.pi
    True
    """
    theta = float(theta)
    if not math.isfinite(theta):
        raise InvalidArgumentError(f"angle must be finite, got {theta!r}")
    wrapped = math.remainder(theta, math.tau)
    # IEEE remainder returns [-pi, pi]; fold the open end onto +pi.
    if wrapped <= -math.pi:
        wrapped += math.tau
    return wrapped


@dataclass(frozen=True)
class Pose:
    """Planar pose of a scan grid within a map grid.

    u and v are map-grid coordinates (column and row, in cells, not
    necessarily integral); theta is the rotation in radians, stored
    wrapped to (-pi, pi].
    """

    u: float
    v: float
    theta: float

    def __post_init__(self) -> None:
        for name in ("u", "v"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise InvalidArgumentError(f"{name} must be finite, got {val!r}")
            object.__setattr__(self, name, val)
        object.__setattr__(self, "theta", wrap_angle(self.theta))


@dataclass(frozen=True)
class Grid2D:
    """Dense float grid of shape (height, width, channels), row-major.

    cell_size, when given, is the edge length of one cell in meters and
    lets pose errors be reported metrically.
    """

    values: np.ndarray
    cell_size: float | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 3:
            raise InvalidArgumentError(
                f"grid values must be (height, width, channels), got shape {values.shape}"
            )
        if values.shape[0] < 1 or values.shape[1] < 1 or values.shape[2] < 1:
            raise InvalidArgumentError(f"grid dimensions must be positive, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("grid values must all be finite")
        if self.cell_size is not None:
            cs = float(self.cell_size)
            if not math.isfinite(cs) or cs <= 0:
                raise InvalidArgumentError(f"cell_size must be positive, got {self.cell_size!r}")
            object.__setattr__(self, "cell_size", cs)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    @property
    def center(self) -> tuple[float, float]:
        """Rotation center (row, col) of the grid."""
        return (self.height - 1) / 2.0, (self.width - 1) / 2.0

    def channel(self, index: int) -> np.ndarray:
        """Read-only view of one channel plane."""
        return self.values[:, :, index]


# A skeleton mask is a Grid2D with exactly two probability channels
# (channel 0 = background, channel 1 = skeleton); the alias keeps
# signatures self-describing.
SkeletonMask = Grid2D


@dataclass(frozen=True)
class PointCloud:
    """N x 3 float array of sensor-frame points (x forward, y left, z up)."""

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidArgumentError(f"points must be (N, 3), got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidArgumentError("point coordinates must all be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


def apply_pose(point: tuple[float, float] | np.ndarray, pose: Pose) -> np.ndarray:
    """Map scan-grid cell offsets into map-grid coordinates.

    `point` holds (u, v) components of a position relative to the scan
    grid's rotation center (u along columns, v along rows). The result is
    R(theta) @ point + (pose.u, pose.v). Accepts a single point or an
    (N, 2) batch.

    Examples
    --------
    >>> apply_pose((1.0, 0.0), Pose(0.0, 0.0, 0.0)).tolist()
    [1.0, 0.0]
    >>> np.allclose(apply_pose((1.0, 0.0), Pose(0.0, 0.0, math.pi / 2)), [0.0, 1.0])
    True
    """
    p = np.asarray(point, dtype=np.float64)
    single = p.ndim == 1
    if single:
        p = p.reshape(1, 2)
    if p.ndim != 2 or p.shape[1] != 2:
        raise InvalidArgumentError(f"point must be (2,) or (N, 2), got shape {p.shape}")
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    out = np.empty_like(p)
    out[:, 0] = c * p[:, 0] - s * p[:, 1] + pose.u
    out[:, 1] = s * p[:, 0] + c * p[:, 1] + pose.v
    return out[0] if single else out


def center_crop(grid: Grid2D, size: int) -> Grid2D:
    """Central square crop of a grid to `size` cells per side.

    The crop start is floor((H - size) / 2) on both axes, which keeps the
    geometric center of the content exactly at the crop's center whenever
    H and size share parity.
    """
    if size < 1:
        raise InvalidArgumentError(f"crop size must be >= 1, got {size}")
    if size > grid.height or size > grid.width:
        raise InvalidArgumentError(
            f"crop size {size} exceeds grid {grid.height}x{grid.width}"
        )
    r0 = (grid.height - size) // 2
    c0 = (grid.width - size) // 2
    return Grid2D(grid.values[r0 : r0 + size, c0 : c0 + size, :].copy(), cell_size=grid.cell_size)


def pose_error(pred: Pose, gt: Pose, cell_size: float = 1.0) -> tuple[float, float]:
    """Location and orientation error between two poses.

    Returns (loc_err, ori_err): Euclidean (u, v) distance scaled by
    cell_size into meters, and the absolute wrapped angle difference in
    degrees.
    """
    if not math.isfinite(cell_size) or cell_size <= 0:
        raise InvalidArgumentError(f"cell_size must be positive, got {cell_size!r}")
    loc = math.hypot(pred.u - gt.u, pred.v - gt.v) * cell_size
    ori = abs(math.degrees(wrap_angle(pred.theta - gt.theta)))
    return loc, ori
