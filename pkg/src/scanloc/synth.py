"""Synthetic benchmark scenes: a rasterized town, a simulated ground scan,
and an overhead patch rendered at a hidden scale, with exact ground truth.

World frame: (x, y) in meters, z up, angles counterclockwise from +x.
The town rasterizes onto square cells (row = y index, col = x index).

A scene's overhead patch is axis-aligned to a sampled view rotation rho:
pixel columns advance along ``u_dir = (cos rho, sin rho)`` and rows along
``v_dir = (sin rho, -cos rho)``. Pairing that basis (a reflection) with
the scan's forward-maps-to-rows grid makes the scan-to-patch alignment a
proper rotation by ``theta = rho - heading - pi/2``, which is exactly the
transform the matcher searches over.

The simulated LiDAR spins at the sensor origin: rays march through the
town raster by exact cell-boundary crossings, the first occupied cell
returns a wall hit, and each hit spawns points at the midpoints of equal
vertical segments of the wall. Rays that clear every obstacle within
range return nothing. Parked and moving cars are rasterized at two
timestamps so the patch (map time) and the scan (scan time) can disagree
when the time-lag augmentation is on.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputFormatError, InvalidArgumentError
from .geometry import PointCloud, wrap_angle
from .io import read_image_gray, read_points_bin, write_image_gray, write_points_bin
from .mapenc import otsu_threshold, sobel_gradients
from .thinning import zhang_suen_thin

__all__ = [
    "TownParams",
    "LidarParams",
    "AugmentationParams",
    "Building",
    "Car",
    "TownMap",
    "Scene",
    "generate_town",
    "simulate_lidar",
    "render_scene",
    "generate_dataset",
    "write_scene",
    "read_scene",
    "read_dataset",
    "patch_basis",
    "world_to_patch",
    "DATASET_MANIFEST",
]

DATASET_MANIFEST = "dataset.json"

_BACKGROUND_LUM = 0.25
_CAR_LUM = 0.65
_BUILDING_LUM_BASE = 0.78
_BUILDING_LUM_PER_M = 0.004


@dataclass(frozen=True)
class TownParams:
    """Layout knobs for the random town generator."""

    size_m: float = 800.0
    raster_m_per_px: float = 0.5
    n_buildings: int = 60
    building_size_range: tuple[float, float] = (8.0, 40.0)
    height_range: tuple[float, float] = (4.0, 30.0)
    clearance_m: float = 3.0
    n_cars: int = 24
    car_size: tuple[float, float] = (4.5, 2.0)
    car_height_m: float = 1.6

    def __post_init__(self) -> None:
        if self.size_m <= 0 or self.raster_m_per_px <= 0:
            raise InvalidArgumentError("town size and raster cell must be positive")
        cells = self.size_m / self.raster_m_per_px
        if abs(cells - round(cells)) > 1e-9:
            raise InvalidArgumentError(
                f"town size {self.size_m} does not divide into {self.raster_m_per_px} m cells"
            )
        lo, hi = self.building_size_range
        if not 0 < lo <= hi:
            raise InvalidArgumentError(f"bad building size range {self.building_size_range!r}")
        lo, hi = self.height_range
        if not 0 < lo <= hi:
            raise InvalidArgumentError(f"bad height range {self.height_range!r}")
        if self.n_buildings < 1:
            raise InvalidArgumentError("need at least one building")

    @property
    def size_px(self) -> int:
        return round(self.size_m / self.raster_m_per_px)


@dataclass(frozen=True)
class LidarParams:
    """Spinning scanner model."""

    n_azimuth: int = 720
    n_elevation: int = 5
    max_range_m: float = 100.0
    forward_offset_m: float = 1.3
    sensor_height_m: float = 2.5
    range_noise_m: float = 0.03

    def __post_init__(self) -> None:
        if self.n_azimuth < 4 or self.n_elevation < 1:
            raise InvalidArgumentError("need at least 4 azimuths and 1 elevation sample")
        if self.max_range_m <= 0 or self.sensor_height_m <= 0:
            raise InvalidArgumentError("range and sensor height must be positive")
        if self.range_noise_m < 0:
            raise InvalidArgumentError("range noise must be nonnegative")


@dataclass(frozen=True)
class AugmentationParams:
    """Per-scene view sampling: patch footprint, hidden scale, timing."""

    patch_size_px: int = 256
    gsd_range: tuple[float, float] = (0.5, 0.5)
    center_jitter_frac: float = 0.3
    luminance_noise: float = 0.02
    time_lag: bool = True

    def __post_init__(self) -> None:
        if self.patch_size_px < 16:
            raise InvalidArgumentError("patch must be at least 16 px")
        lo, hi = self.gsd_range
        if not 0 < lo <= hi:
            raise InvalidArgumentError(f"bad gsd range {self.gsd_range!r}")
        if not 0 <= self.center_jitter_frac < 0.5:
            raise InvalidArgumentError("center jitter fraction must be in [0, 0.5)")
        if self.luminance_noise < 0:
            raise InvalidArgumentError("luminance noise must be nonnegative")


@dataclass(frozen=True)
class Building:
    """Axis-aligned footprint [x0, x1] x [y0, y1] in meters, with height."""

    x0: float
    y0: float
    x1: float
    y1: float
    height: float


@dataclass(frozen=True)
class Car:
    """A car at its map-time pose; at scan time it has drifted forward."""

    x: float
    y: float
    heading: float
    drift_m: float

    def position(self, at_scan_time: bool) -> tuple[float, float]:
        if not at_scan_time:
            return self.x, self.y
        return (
            self.x + self.drift_m * math.cos(self.heading),
            self.y + self.drift_m * math.sin(self.heading),
        )


@dataclass(frozen=True)
class TownMap:
    """A generated town plus its precomputed rasters.

    ``occupancy``/``heights`` hold buildings only; the map-time and
    scan-time variants add the cars at the respective timestamps.
    """

    params: TownParams
    buildings: tuple[Building, ...]
    cars: tuple[Car, ...]
    occupancy: np.ndarray = field(repr=False)
    heights: np.ndarray = field(repr=False)
    occupancy_map_time: np.ndarray = field(repr=False)
    heights_map_time: np.ndarray = field(repr=False)
    occupancy_scan_time: np.ndarray = field(repr=False)
    heights_scan_time: np.ndarray = field(repr=False)

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        mpp = self.params.raster_m_per_px
        return int(math.floor(y / mpp)), int(math.floor(x / mpp))


def _rasterize_rect(occ: np.ndarray, heights: np.ndarray, mpp: float,
                    x0: float, y0: float, x1: float, y1: float, h: float) -> None:
    # A pixel belongs to the rectangle when its center does.
    ny, nx = occ.shape
    ix0 = max(0, int(math.ceil(x0 / mpp - 0.5)))
    ix1 = min(nx - 1, int(math.floor(x1 / mpp - 0.5)))
    iy0 = max(0, int(math.ceil(y0 / mpp - 0.5)))
    iy1 = min(ny - 1, int(math.floor(y1 / mpp - 0.5)))
    if ix0 > ix1 or iy0 > iy1:
        return
    occ[iy0 : iy1 + 1, ix0 : ix1 + 1] = 1
    np.maximum(heights[iy0 : iy1 + 1, ix0 : ix1 + 1], h,
               out=heights[iy0 : iy1 + 1, ix0 : ix1 + 1])


def _rasterize_car(occ: np.ndarray, heights: np.ndarray, mpp: float,
                   cx: float, cy: float, heading: float,
                   length: float, width: float, h: float) -> None:
    ny, nx = occ.shape
    reach = math.hypot(length, width) / 2.0
    ix0 = max(0, int(math.floor((cx - reach) / mpp)))
    ix1 = min(nx - 1, int(math.ceil((cx + reach) / mpp)))
    iy0 = max(0, int(math.floor((cy - reach) / mpp)))
    iy1 = min(ny - 1, int(math.ceil((cy + reach) / mpp)))
    if ix0 > ix1 or iy0 > iy1:
        return
    xs = (np.arange(ix0, ix1 + 1) + 0.5) * mpp - cx
    ys = (np.arange(iy0, iy1 + 1) + 0.5) * mpp - cy
    dx = xs[None, :]
    dy = ys[:, None]
    c, s = math.cos(heading), math.sin(heading)
    along = c * dx + s * dy
    across = -s * dx + c * dy
    inside = (np.abs(along) <= length / 2.0) & (np.abs(across) <= width / 2.0)
    block_occ = occ[iy0 : iy1 + 1, ix0 : ix1 + 1]
    block_h = heights[iy0 : iy1 + 1, ix0 : ix1 + 1]
    block_occ[inside] = 1
    np.maximum(block_h, np.where(inside, h, 0.0), out=block_h)


def generate_town(params: TownParams, seed: int = 0) -> TownMap:
    """Randomly place non-overlapping buildings and cars, rasterize them.

    Buildings are rejection-sampled with a clearance margin so streets
    stay drivable; cars land in free space. Identical parameters and seed
    give an identical town.
    """
    rng = np.random.default_rng(seed)
    mpp = params.raster_m_per_px
    n_px = params.size_px
    lo_sz, hi_sz = params.building_size_range
    lo_h, hi_h = params.height_range
    margin = params.clearance_m

    buildings: list[Building] = []
    attempts = 0
    max_attempts = params.n_buildings * 200
    while len(buildings) < params.n_buildings and attempts < max_attempts:
        attempts += 1
        w = rng.uniform(lo_sz, hi_sz)
        d = rng.uniform(lo_sz, hi_sz)
        x0 = rng.uniform(margin, params.size_m - margin - w)
        y0 = rng.uniform(margin, params.size_m - margin - d)
        cand = (x0 - margin, y0 - margin, x0 + w + margin, y0 + d + margin)
        clash = any(
            cand[0] < b.x1 and cand[2] > b.x0 and cand[1] < b.y1 and cand[3] > b.y0
            for b in buildings
        )
        if clash:
            continue
        h = rng.uniform(lo_h, hi_h)
        buildings.append(Building(x0=x0, y0=y0, x1=x0 + w, y1=y0 + d, height=h))
    if len(buildings) < params.n_buildings:
        raise InvalidArgumentError(
            f"could not place {params.n_buildings} buildings in a "
            f"{params.size_m} m town; lower the count or the clearance"
        )

    occ = np.zeros((n_px, n_px), dtype=np.uint8)
    heights = np.zeros((n_px, n_px), dtype=np.float64)
    for b in buildings:
        _rasterize_rect(occ, heights, mpp, b.x0, b.y0, b.x1, b.y1, b.height)

    cars: list[Car] = []
    length, width = params.car_size
    reach = math.hypot(length, width) / 2.0
    tries = 0
    while len(cars) < params.n_cars and tries < params.n_cars * 200:
        tries += 1
        x = rng.uniform(reach, params.size_m - reach)
        y = rng.uniform(reach, params.size_m - reach)
        heading = rng.uniform(-math.pi, math.pi)
        drift = rng.uniform(4.0, 12.0)
        sx = x + drift * math.cos(heading)
        sy = y + drift * math.sin(heading)
        if not (reach < sx < params.size_m - reach and reach < sy < params.size_m - reach):
            continue
        iy, ix = int(y / mpp), int(x / mpp)
        jy, jx = int(sy / mpp), int(sx / mpp)
        if occ[iy, ix] or occ[jy, jx]:
            continue
        cars.append(Car(x=x, y=y, heading=heading, drift_m=drift))

    occ_map = occ.copy()
    h_map = heights.copy()
    occ_scan = occ.copy()
    h_scan = heights.copy()
    for car in cars:
        mx, my = car.position(at_scan_time=False)
        _rasterize_car(occ_map, h_map, mpp, mx, my, car.heading, length, width, params.car_height_m)
        sx, sy = car.position(at_scan_time=True)
        _rasterize_car(occ_scan, h_scan, mpp, sx, sy, car.heading, length, width, params.car_height_m)

    for arr in (occ, heights, occ_map, h_map, occ_scan, h_scan):
        arr.setflags(write=False)
    return TownMap(
        params=params,
        buildings=tuple(buildings),
        cars=tuple(cars),
        occupancy=occ,
        heights=heights,
        occupancy_map_time=occ_map,
        heights_map_time=h_map,
        occupancy_scan_time=occ_scan,
        heights_scan_time=h_scan,
    )


def _first_hits(occ: np.ndarray, heights: np.ndarray, mpp: float,
                origin: tuple[float, float], world_angles: np.ndarray,
                max_range: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """First occupied cell along each ray.

    Rays are walked by their exact crossings of the raster's cell
    boundaries; the cell owning each inter-crossing segment is probed in
    order. Returns (hit mask, entry range, cell height) per ray.
    """
    ny, nx = occ.shape
    ox, oy = origin
    dirx = np.cos(world_angles)
    diry = np.sin(world_angles)
    n_rays = len(world_angles)

    def crossings(o: float, d: np.ndarray, n_cells: int) -> np.ndarray:
        k_lo = max(0, int(math.floor((o - max_range) / mpp)))
        k_hi = min(n_cells, int(math.ceil((o + max_range) / mpp)))
        lines = np.arange(k_lo, k_hi + 1, dtype=np.float64) * mpp
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (lines[None, :] - o) / d[:, None]
        t[~np.isfinite(t)] = np.inf
        t[(t <= 1e-9) | (t > max_range)] = np.inf
        return t

    t_all = np.concatenate([crossings(ox, dirx, nx), crossings(oy, diry, ny)], axis=1)
    t_all.sort(axis=1)
    ts = np.concatenate([np.zeros((n_rays, 1)), t_all], axis=1)
    entry = ts[:, :-1]
    exit_ = ts[:, 1:]
    finite = np.isfinite(exit_)
    with np.errstate(invalid="ignore"):
        # Sentinel midpoint 0 for open-ended segments; `valid` gates them out.
        mid = np.where(finite, (entry + exit_) * 0.5, 0.0)
        valid = finite & (exit_ - entry > 1e-12)

    px = ox + mid * dirx[:, None]
    py = oy + mid * diry[:, None]
    ix = np.floor(px / mpp).astype(np.int64)
    iy = np.floor(py / mpp).astype(np.int64)
    inside = valid & (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny)
    ix = np.clip(ix, 0, nx - 1)
    iy = np.clip(iy, 0, ny - 1)
    hit_grid = inside & (occ[iy, ix] > 0)

    has_hit = hit_grid.any(axis=1)
    first = np.argmax(hit_grid, axis=1)
    rows = np.arange(n_rays)
    ranges = entry[rows, first]
    cell_h = heights[iy[rows, first], ix[rows, first]]
    return has_hit, ranges, cell_h


def simulate_lidar(town: TownMap, sensor_xy: tuple[float, float], heading: float,
                   params: LidarParams, seed: int = 0,
                   cars_at_scan_time: bool = True) -> PointCloud:
    """Spin a scanner at ``sensor_xy`` and return the cloud in the sensor
    frame (x forward along ``heading``, y left, z up, origin at the
    sensor).

    Each wall hit yields ``n_elevation`` points at the midpoints of equal
    vertical slices of the wall, each with independent Gaussian range
    noise. Rays that reach ``max_range_m`` unobstructed return nothing.
    """
    occ = town.occupancy_scan_time if cars_at_scan_time else town.occupancy_map_time
    heights = town.heights_scan_time if cars_at_scan_time else town.heights_map_time
    mpp = town.params.raster_m_per_px

    beta = 2.0 * math.pi * np.arange(params.n_azimuth) / params.n_azimuth
    world_angles = heading + beta
    has_hit, ranges, cell_h = _first_hits(
        occ, heights, mpp, sensor_xy, world_angles, params.max_range_m
    )
    if not has_hit.any():
        return PointCloud(np.zeros((0, 3)))

    rng = np.random.default_rng(seed)
    beta_h = beta[has_hit]
    r_h = ranges[has_hit]
    h_h = cell_h[has_hit]
    m = params.n_elevation

    # Midpoints of m equal slices of [0, wall height], sensor-relative.
    frac = (np.arange(m) + 0.5) / m
    z = h_h[:, None] * frac[None, :] - params.sensor_height_m
    noise = rng.normal(0.0, params.range_noise_m, size=(len(r_h), m))
    r = r_h[:, None] + noise
    x = r * np.cos(beta_h)[:, None]
    y = r * np.sin(beta_h)[:, None]
    pts = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    return PointCloud(pts)


def patch_basis(rho: float) -> tuple[np.ndarray, np.ndarray]:
    """World-frame directions of the patch's pixel axes.

    Columns advance along ``u_dir``, rows along ``v_dir``. The pair is a
    reflection (determinant -1), which is what makes the scan-to-patch
    alignment a proper rotation.
    """
    u_dir = np.array([math.cos(rho), math.sin(rho)])
    v_dir = np.array([math.sin(rho), -math.cos(rho)])
    return u_dir, v_dir


def world_to_patch(xy: np.ndarray, origin: np.ndarray, rho: float, gsd: float) -> np.ndarray:
    """World points to continuous patch pixel coordinates (u, v).

    Integer coordinates are pixel centers; the patch origin is the world
    position of the top-left pixel corner.
    """
    u_dir, v_dir = patch_basis(rho)
    rel = np.atleast_2d(np.asarray(xy, dtype=np.float64)) - np.asarray(origin, dtype=np.float64)
    pu = rel @ u_dir / gsd - 0.5
    pv = rel @ v_dir / gsd - 0.5
    out = np.stack([pu, pv], axis=-1)
    return out[0] if np.asarray(xy).ndim == 1 else out


@dataclass(frozen=True)
class Scene:
    """One benchmark item: a scan, an overhead patch, and ground truth.

    ``meta`` records the hidden view parameters: the scan origin's patch
    pixel coordinates (u_px, v_px), the alignment angle theta, the ground
    sampling distance in meters per pixel, and the sampling provenance.
    """

    scan: PointCloud
    patch: np.ndarray
    gt_skeleton: np.ndarray
    meta: dict

    def __post_init__(self) -> None:
        patch = np.asarray(self.patch)
        skel = np.asarray(self.gt_skeleton)
        if patch.dtype != np.uint8 or patch.ndim != 2 or patch.shape[0] != patch.shape[1]:
            raise InputFormatError(f"patch must be square uint8, got {patch.dtype} {patch.shape}")
        if skel.shape != patch.shape:
            raise InputFormatError(
                f"skeleton shape {skel.shape} does not match patch {patch.shape}"
            )
        for key in ("u_px", "v_px", "theta", "gsd"):
            if key not in self.meta:
                raise InputFormatError(f"scene meta lacks required key {key!r}")


def _render_luminance(town: TownMap, origin: np.ndarray, rho: float, gsd: float,
                      size_px: int) -> np.ndarray:
    """Sample the map-time town into a clean [0, 1] luminance patch."""
    u_dir, v_dir = patch_basis(rho)
    steps = (np.arange(size_px) + 0.5) * gsd
    # world = origin + pu*u_dir + pv*v_dir, gridded over all pixels
    wx = origin[0] + steps[None, :] * u_dir[0] + steps[:, None] * v_dir[0]
    wy = origin[1] + steps[None, :] * u_dir[1] + steps[:, None] * v_dir[1]
    mpp = town.params.raster_m_per_px
    n = town.params.size_px
    ix = np.floor(wx / mpp).astype(np.int64)
    iy = np.floor(wy / mpp).astype(np.int64)
    inside = (ix >= 0) & (ix < n) & (iy >= 0) & (iy < n)
    ix = np.clip(ix, 0, n - 1)
    iy = np.clip(iy, 0, n - 1)

    occ = town.occupancy_map_time[iy, ix] > 0
    h = town.heights_map_time[iy, ix]
    building = occ & (h > town.params.car_height_m + 1e-9)
    car = occ & ~building
    lum = np.full((size_px, size_px), _BACKGROUND_LUM)
    lum[building] = _BUILDING_LUM_BASE + _BUILDING_LUM_PER_M * h[building]
    lum[car] = _CAR_LUM
    lum[~inside] = _BACKGROUND_LUM
    return lum


def _clean_edge_skeleton(lum: np.ndarray) -> np.ndarray:
    gx, gy = sobel_gradients(lum)
    mag = np.hypot(gx, gy)
    edges = (mag > otsu_threshold(mag)).astype(np.uint8)
    return zhang_suen_thin(edges)


def render_scene(town: TownMap, ego_xy: tuple[float, float], heading: float,
                 lidar: LidarParams, aug: AugmentationParams, seed: int = 0) -> Scene:
    """Render one scene around a placed vehicle.

    The scanner sits ``forward_offset_m`` ahead of the ego point along the
    heading; the scan frame and the ground truth both refer to the sensor.
    Samples the view rotation, hidden scale, and patch center jitter from
    the seed, simulates the scan, renders the patch at map time with
    luminance noise, and derives the clean edge skeleton used as
    supervision. Ground truth follows from the sampled view directly.
    """
    rng = np.random.default_rng(seed)
    rho = rng.uniform(-math.pi, math.pi)
    lo, hi = aug.gsd_range
    gsd = float(lo * (hi / lo) ** rng.random()) if hi > lo else float(lo)
    size = aug.patch_size_px
    half_extent = size * gsd / 2.0

    u_dir, v_dir = patch_basis(rho)
    jitter = rng.uniform(-1.0, 1.0, size=2) * aug.center_jitter_frac * half_extent
    ego = np.asarray(ego_xy, dtype=np.float64)
    sensor = ego + lidar.forward_offset_m * np.array([math.cos(heading), math.sin(heading)])
    center_world = sensor + jitter[0] * u_dir + jitter[1] * v_dir
    origin = center_world - half_extent * (u_dir + v_dir)

    lum = _render_luminance(town, origin, rho, gsd, size)
    skeleton = _clean_edge_skeleton(lum)
    noisy = lum + rng.normal(0.0, aug.luminance_noise, size=lum.shape)
    patch = np.clip(np.rint(noisy * 255.0), 0, 255).astype(np.uint8)

    scan_seed = int(rng.integers(0, 2**31 - 1))
    scan = simulate_lidar(
        town, (float(sensor[0]), float(sensor[1])), heading, lidar,
        seed=scan_seed, cars_at_scan_time=aug.time_lag,
    )

    uv = world_to_patch(sensor, origin, rho, gsd)
    theta = wrap_angle(rho - heading - math.pi / 2.0)
    meta = {
        "u_px": float(uv[0]),
        "v_px": float(uv[1]),
        "theta": float(theta),
        "gsd": float(gsd),
        "patch_size_px": int(size),
        "rho": float(rho),
        "heading": float(heading),
        "ego_xy": [float(ego[0]), float(ego[1])],
        "sensor_xy": [float(sensor[0]), float(sensor[1])],
        "origin_xy": [float(origin[0]), float(origin[1])],
        "time_lag": bool(aug.time_lag),
        "seed": int(seed),
    }
    return Scene(scan=scan, patch=patch, gt_skeleton=skeleton, meta=meta)


def _place_vehicle(town: TownMap, rng: np.random.Generator,
                   lidar: LidarParams, max_tries: int = 200) -> tuple[tuple[float, float], float]:
    """Sample a free ego position (sensor cell included) with at least one
    building within scanning distance."""
    size = town.params.size_m
    lo, hi = 0.2 * size, 0.8 * size
    for _ in range(max_tries):
        x = rng.uniform(lo, hi)
        y = rng.uniform(lo, hi)
        heading = rng.uniform(-math.pi, math.pi)
        sx = x + lidar.forward_offset_m * math.cos(heading)
        sy = y + lidar.forward_offset_m * math.sin(heading)
        blocked = False
        for px, py in ((x, y), (sx, sy)):
            iy, ix = town.cell_of(px, py)
            if town.occupancy_scan_time[iy, ix] or town.occupancy_map_time[iy, ix]:
                blocked = True
                break
        if blocked:
            continue
        near = any(
            max(b.x0 - x, x - b.x1, 0.0) ** 2 + max(b.y0 - y, y - b.y1, 0.0) ** 2 <= 40.0**2
            for b in town.buildings
        )
        if near:
            return (x, y), heading
    raise InvalidArgumentError("could not place a vehicle in free space near buildings")


def _scene_dir(root: Path, index: int) -> Path:
    return root / f"scene_{index:04d}"


def write_scene(scene: Scene, directory: str | Path) -> dict[str, str]:
    """Write scan.bin, patch.png, skeleton.pgm, meta.json into a directory.

    Returns {filename: sha256} for manifest building.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_points_bin(scene.scan, directory / "scan.bin")
    write_image_gray(scene.patch, directory / "patch.png")
    write_image_gray((scene.gt_skeleton * 255).astype(np.uint8), directory / "skeleton.pgm")
    meta_text = json.dumps(scene.meta, sort_keys=True, indent=2) + "\n"
    (directory / "meta.json").write_text(meta_text)

    digests = {}
    for name in ("scan.bin", "patch.png", "skeleton.pgm", "meta.json"):
        digests[name] = hashlib.sha256((directory / name).read_bytes()).hexdigest()
    return digests


def read_scene(directory: str | Path) -> Scene:
    """Load a scene written by write_scene; missing files are named."""
    directory = Path(directory)
    meta_path = directory / "meta.json"
    if not meta_path.is_file():
        raise InputFormatError(f"missing scene metadata: {meta_path}")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"unreadable scene metadata {meta_path}: {exc}") from exc
    scan = read_points_bin(directory / "scan.bin")
    patch = read_image_gray(directory / "patch.png")
    if patch.ndim == 3:
        raise InputFormatError(f"expected grayscale patch in {directory / 'patch.png'}")
    skel_raw = read_image_gray(directory / "skeleton.pgm")
    skeleton = (skel_raw > 127).astype(np.uint8)
    return Scene(scan=scan, patch=patch, gt_skeleton=skeleton, meta=meta)


def generate_dataset(out_dir: str | Path, n_scenes: int,
                     town: TownParams | None = None,
                     lidar: LidarParams | None = None,
                     aug: AugmentationParams | None = None,
                     seed: int = 0) -> Path:
    """Generate a dataset directory: one town, n scenes, and a manifest
    with per-file content digests.

    Fully deterministic in (parameters, seed): regenerating into a fresh
    directory reproduces every byte.
    """
    town_params = town or TownParams()
    lidar_params = lidar or LidarParams()
    aug_params = aug or AugmentationParams()
    if n_scenes < 1:
        raise InvalidArgumentError(f"need at least one scene, got {n_scenes}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    root_ss = np.random.SeedSequence(seed)
    town_ss, scenes_ss = root_ss.spawn(2)
    town_map = generate_town(town_params, seed=int(town_ss.generate_state(1)[0]))

    files: dict[str, str] = {}
    for i, scene_ss in enumerate(scenes_ss.spawn(n_scenes)):
        state = scene_ss.generate_state(2)
        place_rng = np.random.default_rng(int(state[0]))
        ego, heading = _place_vehicle(town_map, place_rng, lidar_params)
        scene = render_scene(town_map, ego, heading, lidar_params, aug_params,
                             seed=int(state[1]))
        scene.meta["scene_index"] = i
        digests = write_scene(scene, _scene_dir(out, i))
        for name, digest in digests.items():
            files[f"scene_{i:04d}/{name}"] = digest

    manifest = {
        "n_scenes": n_scenes,
        "seed": seed,
        "town": asdict(town_params),
        "lidar": asdict(lidar_params),
        "augmentation": asdict(aug_params),
        "files": files,
    }
    (out / DATASET_MANIFEST).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return out


def read_dataset(directory: str | Path) -> list[Scene]:
    """Load every scene of a dataset directory, in index order."""
    directory = Path(directory)
    manifest_path = directory / DATASET_MANIFEST
    if not manifest_path.is_file():
        raise InputFormatError(f"missing dataset manifest: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    n = int(manifest["n_scenes"])
    return [read_scene(_scene_dir(directory, i)) for i in range(n)]
