"""Diagnostic losses: pose likelihood, scale regression, skeleton
supervision.

These mirror the quantities a trained variant of the engine would
optimize; here they are reported per scene to make regressions visible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .geometry import Pose, SkeletonMask, wrap_angle
from .matching import ProbabilityVolume

__all__ = [
    "LossReport",
    "pose_nll",
    "scale_loss",
    "skeleton_bce",
    "NLL_CLAMP",
    "BCE_CLAMP",
]

NLL_CLAMP = 1e-30
BCE_CLAMP = 1e-4


@dataclass(frozen=True)
class LossReport:
    """Per-scene loss terms; total is their sum in declaration order."""

    nll: float
    scale_mse: float
    skeleton_bce: float
    total: float = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        for name in ("nll", "scale_mse", "skeleton_bce"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise InvalidArgumentError(f"{name} must be finite, got {val!r}")
            object.__setattr__(self, name, val)
        expected = self.nll + self.scale_mse + self.skeleton_bce
        if self.total is None:
            object.__setattr__(self, "total", expected)
        elif float(self.total) != expected:
            raise InvalidArgumentError(
                f"total {self.total!r} does not equal nll + scale_mse + skeleton_bce = {expected!r}"
            )


def pose_nll(p: ProbabilityVolume, gt: Pose, clamp: float = NLL_CLAMP) -> float:
    """Negative log probability of the cell containing the true pose.

    The pose snaps to the nearest cell (row and column rounded, rotation
    to the nearest slot with wraparound); probabilities are clamped below
    at `clamp` before the log. A pose whose rounded cell falls outside
    the volume is an error.
    """
    n_rot, h, w = p.probs.shape
    row = int(np.rint(gt.v))
    col = int(np.rint(gt.u))
    if not (0 <= row < h and 0 <= col < w):
        raise InvalidArgumentError(
            f"pose (u={gt.u}, v={gt.v}) falls outside the {h}x{w} volume extent"
        )
    diffs = [abs(wrap_angle(gt.theta - float(a))) for a in p.angles]
    slot = int(np.argmin(diffs))
    prob = max(float(p.probs[slot, row, col]), clamp)
    return -math.log(prob)


def scale_loss(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean squared error between predicted and true scale factors."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    gt = np.asarray(gt, dtype=np.float64).ravel()
    if pred.size == 0:
        raise InvalidArgumentError("scale loss needs at least one pair")
    if pred.shape != gt.shape:
        raise InvalidArgumentError(f"length mismatch: {pred.shape} vs {gt.shape}")
    return float(np.mean((pred - gt) ** 2))


def skeleton_bce(pred: SkeletonMask, gt: np.ndarray, coverage: np.ndarray, clamp: float = BCE_CLAMP) -> float:
    """Binary cross-entropy of the predicted skeleton against a binary
    target, averaged over the covered cells only.

    `coverage` marks the region the scan actually observed; cells outside
    it carry no supervision signal and are excluded entirely.
    """
    gt_arr = np.asarray(gt)
    cov = np.asarray(coverage) != 0
    if pred.channels != 2:
        raise InvalidArgumentError(f"predicted skeleton must have 2 channels, got {pred.channels}")
    shape = (pred.height, pred.width)
    if gt_arr.shape != shape or cov.shape != shape:
        raise InvalidArgumentError(
            f"shape mismatch: pred {shape}, gt {gt_arr.shape}, coverage {cov.shape}"
        )
    if not cov.any():
        raise InvalidArgumentError("coverage mask is empty, nothing to supervise")
    q = np.clip(pred.channel(1), clamp, 1.0 - clamp)
    g = (gt_arr != 0).astype(np.float64)
    bce = -(g * np.log(q) + (1.0 - g) * np.log(1.0 - q))
    return float(bce[cov].mean())
