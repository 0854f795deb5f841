"""Exhaustive pose scoring: rotated scan templates cross-correlated with a
map grid over every translation, batched through real FFTs.

Conventions
-----------
* Rotation angles for an n-slot volume are ``-pi + 2*pi*i/n`` for
  ``i = 0..n-1`` (strictly increasing; slot 0 is the half turn).
* ``rotate_feature`` rotates counterclockwise in the (u, v) = (col, row)
  plane about the grid's geometric center. Exact multiples of 90 degrees
  are pure lattice permutations; anything else is inverse-mapped nearest
  neighbour with zero fill.
* Translation (a, b) of a score volume places the template's anchor cell
  ``((T-1)//2, (T-1)//2)`` at map cell (row a, col b). For odd templates
  the anchor is the geometric center; for even templates the center sits
  half a cell beyond the anchor on both axes (callers that need the exact
  center location add that half-cell themselves).
* Scores are the channel-summed products divided by the template area,
  with zero padding outside the map (plain linear correlation, no
  overlap renormalization, so partial-overlap border translations score
  systematically lower).

The brute-force evaluator mirrors the same conventions with explicit
nested loops and exists to cross-check the FFT path; the two must agree
to tight float tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sp_fft

from .errors import InvalidArgumentError, OracleGuardError
from .geometry import Grid2D, Pose, wrap_angle

__all__ = [
    "ScoreVolume",
    "ProbabilityVolume",
    "PoseEstimate",
    "rotation_angles",
    "rotate_feature",
    "score_volume",
    "skeleton_score_volume",
    "fuse_probability",
    "estimate_pose",
    "brute_force_score_volume",
]

_QUARTER = math.pi / 2.0
_BRUTE_FORCE_LIMIT = 64


def rotation_angles(n_rot: int) -> np.ndarray:
    """The rotation grid for an n-slot score volume."""
    if n_rot < 1:
        raise InvalidArgumentError(f"n_rot must be >= 1, got {n_rot}")
    i = np.arange(n_rot, dtype=np.float64)
    return -math.pi + 2.0 * math.pi * i / n_rot


@dataclass(frozen=True)
class ScoreVolume:
    """Pose scores indexed (rotation slot, map row, map col)."""

    scores: np.ndarray
    angles: np.ndarray

    def __post_init__(self) -> None:
        scores = np.asarray(self.scores, dtype=np.float64)
        angles = np.asarray(self.angles, dtype=np.float64)
        if scores.ndim != 3:
            raise InvalidArgumentError(f"scores must be (n_rot, H, W), got shape {scores.shape}")
        if angles.ndim != 1 or angles.shape[0] != scores.shape[0]:
            raise InvalidArgumentError("angles must match the rotation axis of scores")
        if not np.all(np.isfinite(scores)):
            raise InvalidArgumentError("scores must all be finite")
        if angles.shape[0] > 1 and not np.all(np.diff(angles) > 0):
            raise InvalidArgumentError("rotation angles must be strictly increasing")
        scores.setflags(write=False)
        angles.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "angles", angles)

    @property
    def n_rot(self) -> int:
        return self.scores.shape[0]


@dataclass(frozen=True)
class ProbabilityVolume:
    """Normalized pose probabilities over (rotation, row, col)."""

    probs: np.ndarray
    angles: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        angles = np.asarray(self.angles, dtype=np.float64)
        if probs.ndim != 3:
            raise InvalidArgumentError(f"probs must be (n_rot, H, W), got shape {probs.shape}")
        if angles.ndim != 1 or angles.shape[0] != probs.shape[0]:
            raise InvalidArgumentError("angles must match the rotation axis of probs")
        if probs.min() < 0:
            raise InvalidArgumentError("probabilities must be nonnegative")
        total = probs.sum()
        if not math.isclose(total, 1.0, rel_tol=0.0, abs_tol=1e-6):
            raise InvalidArgumentError(f"probabilities must sum to 1 within 1e-6, got {total!r}")
        probs.setflags(write=False)
        angles.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "angles", angles)


@dataclass(frozen=True)
class PoseEstimate:
    """Argmax pose of a probability volume plus its probability mass."""

    pose: Pose
    confidence: float
    rotation_index: int


def rotate_feature(f: Grid2D, theta: float) -> Grid2D:
    """Rotate a square feature grid by theta about its center.

    Exact multiples of pi/2 reduce to lattice permutations (bit-exact, no
    resampling); other angles use inverse-mapped nearest-neighbour
    sampling, with cells mapping outside the source set to zero.
    """
    if f.height != f.width:
        raise InvalidArgumentError(f"rotation needs a square grid, got {f.height}x{f.width}")
    theta = wrap_angle(theta)
    quarters = theta / _QUARTER
    k = round(quarters)
    if abs(quarters - k) < 1e-9:
        rotated = np.rot90(f.values, (3 * int(k)) % 4, axes=(0, 1)).copy()
        return Grid2D(rotated, cell_size=f.cell_size)

    n = f.height
    m = (n - 1) / 2.0
    offs = np.arange(n, dtype=np.float64) - m
    dr = offs[:, None]  # output row offset
    dc = offs[None, :]  # output col offset
    c, s = math.cos(theta), math.sin(theta)
    # Inverse map in (u, v) = (col, row) algebra: src = R(-theta) @ dst.
    src_c = c * dc + s * dr
    src_r = -s * dc + c * dr
    ri = np.rint(src_r + m).astype(np.int64)
    ci = np.rint(src_c + m).astype(np.int64)
    valid = (ri >= 0) & (ri < n) & (ci >= 0) & (ci < n)
    out = np.zeros_like(f.values)
    out[valid] = f.values[ri[valid], ci[valid], :]
    return Grid2D(out, cell_size=f.cell_size)


def _check_operands(f_map: Grid2D, f_bev: Grid2D) -> None:
    if f_map.channels != f_bev.channels:
        raise InvalidArgumentError(
            f"channel mismatch: map has {f_map.channels}, scan grid has {f_bev.channels}"
        )
    if f_bev.height != f_bev.width:
        raise InvalidArgumentError(f"scan grid must be square, got {f_bev.height}x{f_bev.width}")
    if f_bev.height > f_map.height or f_bev.width > f_map.width:
        raise InvalidArgumentError(
            f"scan grid {f_bev.height}x{f_bev.width} exceeds map grid "
            f"{f_map.height}x{f_map.width}"
        )


def score_volume(f_map: Grid2D, f_bev: Grid2D, n_rot: int, workers: int = 1) -> ScoreVolume:
    """Correlate every rotation of a scan grid against a map grid at every
    translation.

    Args:
        f_map: map feature grid (H_m, W_m, C).
        f_bev: square scan feature grid (T, T, C), T <= H_m and W_m.
        n_rot: number of rotation slots.
        workers: FFT worker threads; results are identical for any value.

    Returns:
        ScoreVolume of shape (n_rot, H_m, W_m); entry (i, a, b) is the
        channel-summed product of the map and the rotated scan grid with
        its anchor cell at map (a, b), divided by the scan grid area.
    """
    _check_operands(f_map, f_bev)
    angles = rotation_angles(n_rot)
    hm, wm, nch = f_map.values.shape
    t = f_bev.height
    anchor = (t - 1) // 2

    pr = sp_fft.next_fast_len(hm + t - 1, real=True)
    pc = sp_fft.next_fast_len(wm + t - 1, real=True)

    map_pad = np.zeros((nch, pr, pc), dtype=np.float64)
    map_pad[:, :hm, :wm] = np.moveaxis(f_map.values, 2, 0)
    map_spec = sp_fft.rfft2(map_pad, axes=(1, 2), workers=workers)

    tmpl_pad = np.zeros((n_rot, nch, pr, pc), dtype=np.float64)
    for i, ang in enumerate(angles):
        tmpl_pad[i, :, :t, :t] = np.moveaxis(rotate_feature(f_bev, ang).values, 2, 0)
    tmpl_spec = sp_fft.rfft2(tmpl_pad, axes=(2, 3), workers=workers)

    # Channel-summed circular correlation; padding makes it linear.
    cross = np.einsum("crk,icrk->irk", map_spec, np.conj(tmpl_spec))
    corr = sp_fft.irfft2(cross, s=(pr, pc), axes=(1, 2), workers=workers)

    rows = (np.arange(hm) - anchor) % pr
    cols = (np.arange(wm) - anchor) % pc
    scores = corr[:, rows[:, None], cols[None, :]] / float(t * t)
    return ScoreVolume(scores=scores, angles=angles)


def skeleton_score_volume(f_map_s: Grid2D, f_bev_scaled: Grid2D, n_rot: int, workers: int = 1) -> ScoreVolume:
    """score_volume specialized to two-channel skeleton masks."""
    if f_map_s.channels != 2 or f_bev_scaled.channels != 2:
        raise InvalidArgumentError(
            f"skeleton operands must have 2 channels, got {f_map_s.channels} and {f_bev_scaled.channels}"
        )
    return score_volume(f_map_s, f_bev_scaled, n_rot, workers=workers)


def fuse_probability(omega: ScoreVolume, psi: ScoreVolume) -> ProbabilityVolume:
    """Softmax of the summed score volumes over all poses (max-subtracted
    for stability)."""
    if omega.scores.shape != psi.scores.shape:
        raise InvalidArgumentError(
            f"score volumes differ in shape: {omega.scores.shape} vs {psi.scores.shape}"
        )
    if not np.array_equal(omega.angles, psi.angles):
        raise InvalidArgumentError("score volumes differ in rotation grids")
    logits = omega.scores + psi.scores
    shifted = logits - logits.max()
    expd = np.exp(shifted)
    probs = expd / expd.sum()
    return ProbabilityVolume(probs=probs, angles=omega.angles)


def estimate_pose(p: ProbabilityVolume) -> PoseEstimate:
    """Argmax pose of a probability volume.

    Ties resolve to the smallest linear index (rotation-major, then row,
    then column). The returned pose reads (u = col, v = row,
    theta = angles[slot]); confidence is the probability at the argmax.
    """
    flat = int(np.argmax(p.probs))
    i, a, b = np.unravel_index(flat, p.probs.shape)
    pose = Pose(u=float(b), v=float(a), theta=float(p.angles[i]))
    return PoseEstimate(pose=pose, confidence=float(p.probs[i, a, b]), rotation_index=int(i))


def brute_force_score_volume(f_map: Grid2D, f_bev: Grid2D, n_rot: int) -> ScoreVolume:
    """Reference evaluation of the score volume by direct summation.

    Same conventions as score_volume, nested loops instead of FFTs.
    Guarded to map grids of at most 64x64 cells.
    """
    _check_operands(f_map, f_bev)
    hm, wm, _ = f_map.values.shape
    if hm > _BRUTE_FORCE_LIMIT or wm > _BRUTE_FORCE_LIMIT:
        raise OracleGuardError(
            f"brute-force scorer is limited to {_BRUTE_FORCE_LIMIT}x{_BRUTE_FORCE_LIMIT} maps, "
            f"got {hm}x{wm}"
        )
    angles = rotation_angles(n_rot)
    t = f_bev.height
    anchor = (t - 1) // 2
    area = float(t * t)
    scores = np.zeros((n_rot, hm, wm), dtype=np.float64)
    for i, ang in enumerate(angles):
        tmpl = rotate_feature(f_bev, ang).values
        for a in range(hm):
            r_lo = max(0, anchor - a)
            r_hi = min(t, hm + anchor - a)
            if r_lo >= r_hi:
                continue
            for b in range(wm):
                c_lo = max(0, anchor - b)
                c_hi = min(t, wm + anchor - b)
                if c_lo >= c_hi:
                    continue
                window = f_map.values[
                    a - anchor + r_lo : a - anchor + r_hi,
                    b - anchor + c_lo : b - anchor + c_hi,
                    :,
                ]
                scores[i, a, b] = np.sum(window * tmpl[r_lo:r_hi, c_lo:c_hi, :]) / area
    return ScoreVolume(scores=scores, angles=angles)
