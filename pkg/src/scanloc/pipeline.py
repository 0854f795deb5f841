"""End-to-end localization of one scene.

The scan becomes a bird's-eye feature grid and a thinned skeleton; the
patch becomes a map feature grid and an edge skeleton at the same
resolution. Scale alignment votes on the hidden footprint ratio, both
scan grids are resampled by the winning factor, cropped to a rotation-
friendly disc template centered on the sensor, and correlated against
the map grids over every rotation and translation. The fused softmax
volume yields the pose estimate, reported both in feature cells and in
patch pixels.

Coordinate bookkeeping: feature cell (a, b) spans stride x stride patch
pixels, so continuous feature coordinate f maps to pixel (f + 0.5) *
stride - 0.5 and back. An even template's anchor cell sits half a cell
before its geometric center; the sensor lives at the geometric center,
so half a cell is added back when converting the argmax to a pose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bev import bev_skeleton, encode_bev, voxelize
from .config import RunConfig
from .errors import InvalidArgumentError
from .geometry import Grid2D, Pose, center_crop
from .losses import LossReport, pose_nll, scale_loss, skeleton_bce
from .mapenc import MapPatch, default_stride, map_features, map_skeleton
from .matching import (
    PoseEstimate,
    ProbabilityVolume,
    ScoreVolume,
    estimate_pose,
    fuse_probability,
    score_volume,
    skeleton_score_volume,
)
from .scale import ScaleEstimate, make_bins, rescale_bev, score_scales
from .synth import Scene

__all__ = [
    "LocalizationResult",
    "localize_scene",
    "disc_mask",
    "feature_to_pixel",
    "pixel_to_feature",
    "ground_truth_scale",
]


def feature_to_pixel(f: float, stride: int) -> float:
    """Continuous feature-cell coordinate to patch-pixel coordinate."""
    return (f + 0.5) * stride - 0.5


def pixel_to_feature(px: float, stride: int) -> float:
    """Continuous patch-pixel coordinate to feature-cell coordinate."""
    return (px + 0.5) / stride - 0.5


def ground_truth_scale(gsd: float, stride: int, bev_cell_m: float) -> float:
    """Hidden scale factor: ground meters per map feature cell over
    ground meters per scan grid cell."""
    if gsd <= 0 or stride < 1 or bev_cell_m <= 0:
        raise InvalidArgumentError("gsd, stride and cell size must be positive")
    return stride * gsd / bev_cell_m


def disc_mask(f: Grid2D) -> Grid2D:
    """Zero every cell outside the grid's inscribed circle.

    Rotating a square template clips its corners differently at every
    angle, which biases the score toward rotations that keep more mass;
    a disc support is rotation-invariant.
    """
    n = f.height
    if n != f.width:
        raise InvalidArgumentError(f"disc mask needs a square grid, got {n}x{f.width}")
    m = (n - 1) / 2.0
    offs = np.arange(n, dtype=np.float64) - m
    rr = offs[:, None] ** 2 + offs[None, :] ** 2
    keep = rr <= (n / 2.0) ** 2
    out = f.values.copy()
    out[~keep] = 0.0
    return Grid2D(out, cell_size=f.cell_size)


@dataclass(frozen=True)
class LocalizationResult:
    """Everything localize_scene derives from one scene."""

    estimate: PoseEstimate
    pose_px: Pose
    probability: ProbabilityVolume
    scale: ScaleEstimate | None
    scale_used: float
    gt_scale: float
    gt_pose_feature: Pose
    stride: int
    feature_cell_m: float
    losses: LossReport


def _zero_like(vol: ScoreVolume) -> ScoreVolume:
    return ScoreVolume(np.zeros_like(vol.scores), vol.angles)


def _pool_binary(mask: np.ndarray, stride: int) -> np.ndarray:
    n = mask.shape[0] // stride
    return mask.reshape(n, stride, n, stride).max(axis=(1, 3))


def localize_scene(scene: Scene, cfg: RunConfig, scale_align: bool | None = None) -> LocalizationResult:
    """Localize a scan within its overhead patch.

    Args:
        scene: scan, patch, and ground-truth metadata.
        cfg: run configuration.
        scale_align: override cfg.scale.enabled (None keeps it).

    Returns:
        LocalizationResult with the pose in feature cells and patch
        pixels, the probability volume, the scale vote, and the loss
        report against the scene's ground truth.
    """
    m = cfg.matching
    patch = MapPatch.from_gray(scene.patch)
    stride = m.stride if m.stride is not None else default_stride(patch.size)
    if patch.size % stride != 0:
        raise InvalidArgumentError(f"patch size {patch.size} not divisible by stride {stride}")
    n_map = patch.size // stride
    if m.template_size > n_map:
        raise InvalidArgumentError(
            f"template of {m.template_size} cells does not fit a "
            f"{n_map}-cell map grid (patch {patch.size} px at stride {stride})"
        )

    f_map = map_features(patch, stride)
    s_map = map_skeleton(patch, stride)

    grid = voxelize(scene.scan, cfg.voxel, seed=0)
    f_bev = encode_bev(grid)
    s_bev = bev_skeleton(f_bev)

    align = cfg.scale.enabled if scale_align is None else scale_align
    scale_est: ScaleEstimate | None = None
    if align:
        bins = make_bins(cfg.scale.s_min, cfg.scale.s_max, cfg.scale.n_bins)
        scale_est = score_scales(
            s_bev, s_map, bins,
            coarse_rotations=cfg.scale.coarse_rotations,
            temperature=cfg.scale.temperature,
            workers=m.workers,
        )
        scale_used = scale_est.scale
    else:
        scale_used = 1.0

    tmpl_f = disc_mask(center_crop(rescale_bev(f_bev, scale_used), m.template_size))
    tmpl_s = disc_mask(center_crop(rescale_bev(s_bev, scale_used), m.template_size))

    omega = score_volume(f_map, tmpl_f, m.n_rotations, workers=m.workers)
    psi = skeleton_score_volume(s_map, tmpl_s, m.n_rotations, workers=m.workers)
    if m.stage == "features":
        prob = fuse_probability(omega, _zero_like(psi))
    elif m.stage == "skeleton":
        prob = fuse_probability(_zero_like(omega), psi)
    else:
        prob = fuse_probability(omega, psi)
    est = estimate_pose(prob)

    # Even templates: the sensor sits half a cell past the anchor.
    center_off = 0.5 if m.template_size % 2 == 0 else 0.0
    u_f = est.pose.u + center_off
    v_f = est.pose.v + center_off
    pose_px = Pose(
        u=feature_to_pixel(u_f, stride),
        v=feature_to_pixel(v_f, stride),
        theta=est.pose.theta,
    )

    meta = scene.meta
    gsd = float(meta["gsd"])
    bev_cell = float(cfg.voxel.pillar_size[0])
    gt_scale = ground_truth_scale(gsd, stride, bev_cell)
    gt_pose_feature = Pose(
        u=pixel_to_feature(float(meta["u_px"]), stride),
        v=pixel_to_feature(float(meta["v_px"]), stride),
        theta=float(meta["theta"]),
    )

    nll = pose_nll(prob, gt_pose_feature)
    mse = scale_loss(np.array([scale_used]), np.array([gt_scale]))
    gt_skel = _pool_binary(np.asarray(scene.gt_skeleton), stride)
    coverage = _coverage_disc(
        n_map,
        u=gt_pose_feature.u,
        v=gt_pose_feature.v,
        radius=cfg.synth.lidar.max_range_m / (stride * gsd),
    )
    bce = skeleton_bce(s_map, gt_skel, coverage)
    losses = LossReport(nll=nll, scale_mse=mse, skeleton_bce=bce)

    return LocalizationResult(
        estimate=est,
        pose_px=pose_px,
        probability=prob,
        scale=scale_est,
        scale_used=float(scale_used),
        gt_scale=float(gt_scale),
        gt_pose_feature=gt_pose_feature,
        stride=stride,
        feature_cell_m=stride * gsd,
        losses=losses,
    )


def _coverage_disc(n: int, u: float, v: float, radius: float) -> np.ndarray:
    """Cells within the scanned radius of the true pose."""
    cols = np.arange(n, dtype=np.float64)[None, :] - u
    rows = np.arange(n, dtype=np.float64)[:, None] - v
    disc = rows**2 + cols**2 <= radius**2
    if not disc.any():  # degenerate radius: at least the nearest cell
        disc = np.zeros((n, n), dtype=bool)
        disc[min(max(int(round(v)), 0), n - 1), min(max(int(round(u)), 0), n - 1)] = True
    return disc
