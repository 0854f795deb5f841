"""Scale alignment between scan-derived and map-derived skeletons.

The ground footprint of one map cell is unknown relative to one scan
cell, so a geometric ladder of candidate factors is scored by how much
of the rescaled scan skeleton the map skeleton explains, and the
softmax-weighted sum of the ladder values becomes the continuous
estimate.

Rescaling convention (nearest neighbour, round-half-up sizes, output
always the input size): a factor above 1 shrinks the content and centers
it in a zero canvas; a factor below 1 enlarges the central window to fill
the canvas; a factor of exactly 1 returns a bit-identical copy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .bev import SKELETON_EPS
from .errors import DegenerateScaleError, InvalidArgumentError
from .geometry import Grid2D, SkeletonMask, center_crop
from .mapenc import edge_falloff
from .matching import rotate_feature, rotation_angles, score_volume

__all__ = [
    "ScaleBins",
    "ScaleEstimate",
    "make_bins",
    "rescale_bev",
    "score_scales",
    "TEMPLATE_SIGMA",
]


@dataclass(frozen=True)
class ScaleBins:
    """Geometrically spaced candidate scale factors."""

    values: np.ndarray
    s_min: float
    s_max: float

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def log_step(self) -> float:
        """Log-spacing between adjacent bins."""
        return math.log(self.s_max / self.s_min) / (len(self) - 1)


@dataclass(frozen=True)
class ScaleEstimate:
    """Result of scale scoring: per-bin weights and the blended factor."""

    weights: np.ndarray
    scale: float
    scores: np.ndarray
    low_confidence: bool = False


def make_bins(s_min: float, s_max: float, n: int) -> ScaleBins:
    """Geometric ladder of n factors from s_min to s_max inclusive.

    Example: make_bins(1, 4, 3) -> [1, 2, 4].
    """
    if not (math.isfinite(s_min) and math.isfinite(s_max)) or s_min <= 0 or s_min >= s_max:
        raise InvalidArgumentError(f"need 0 < s_min < s_max, got {(s_min, s_max)!r}")
    if n < 2:
        raise InvalidArgumentError(f"need at least 2 bins, got {n}")
    i = np.arange(n, dtype=np.float64)
    values = s_min * (s_max / s_min) ** (i / (n - 1))
    return ScaleBins(values=values, s_min=float(s_min), s_max=float(s_max))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _nn_indices(n_out: int, n_in: int) -> np.ndarray:
    """Nearest-neighbour source indices mapping n_in samples onto n_out."""
    idx = np.floor((np.arange(n_out) + 0.5) * n_in / n_out).astype(np.int64)
    return np.clip(idx, 0, n_in - 1)


def rescale_bev(f: Grid2D, s: float) -> Grid2D:
    """Resample a square grid so its content spacing matches a map whose
    cells cover `s` times as much ground.

    s > 1 shrinks the content to round(H/s) cells centered in zeros;
    s < 1 enlarges the central round(H*s) window back to full size;
    s == 1 returns an identical copy.
    """
    if not math.isfinite(s) or s <= 0:
        raise InvalidArgumentError(f"scale factor must be positive, got {s!r}")
    if f.height != f.width:
        raise InvalidArgumentError(f"rescale needs a square grid, got {f.height}x{f.width}")
    h = f.height
    if s == 1.0:
        return Grid2D(f.values.copy(), cell_size=f.cell_size)

    if s > 1.0:
        new_size = _round_half_up(h / s)
        if new_size < 1:
            raise DegenerateScaleError(f"scale {s} collapses a {h}-cell grid below one cell")
        idx = _nn_indices(new_size, h)
        shrunk = f.values[np.ix_(idx, idx)]
        out = np.zeros_like(f.values)
        r0 = (h - new_size) // 2
        out[r0 : r0 + new_size, r0 : r0 + new_size, :] = shrunk
        return Grid2D(out, cell_size=f.cell_size)

    window = _round_half_up(h * s)
    if window < 1:
        raise DegenerateScaleError(f"scale {s} collapses a {h}-cell grid below one cell")
    r0 = (h - window) // 2
    central = f.values[r0 : r0 + window, r0 : r0 + window, :]
    idx = _nn_indices(h, window)
    return Grid2D(central[np.ix_(idx, idx)], cell_size=f.cell_size)


# Bins whose rescale window keeps fewer independent stroke cells than
# this cannot be verified against the map at all and are excluded from
# the vote: at any mass below this even chance placements reach extreme
# match statistics under every normalization.
_MIN_EFFECTIVE_MASS = 25.0
# Template band width (cells, after rescaling): wide enough that no
# stroke falls between surviving samples at any shrink factor, narrow
# enough that small templates keep their structure instead of washing
# into blobs whose match statistics have heavy tails.
TEMPLATE_SIGMA = 0.5
# Radius (cells) at which the outer-stroke emphasis reaches half its
# ceiling. Saturation keeps a handful of far strokes from outvoting a
# dense near field while still reining in the scale-blind center.
_RADIUS_SOFT = 15.0


def _content_disc(size: int, diameter: int) -> np.ndarray:
    """Centered disc support mask matching the template's content area."""
    c = (size - 1) / 2.0
    y = np.arange(size, dtype=np.float64) - c
    rr = y[:, None] ** 2 + y[None, :] ** 2
    return (rr <= (diameter / 2.0) ** 2).astype(np.float64)


def _radius_weight(size: int) -> np.ndarray:
    """Saturating emphasis on cells far from the grid center."""
    c = (size - 1) / 2.0
    y = np.arange(size, dtype=np.float64) - c
    r = np.sqrt(y[:, None] ** 2 + y[None, :] ** 2)
    return r / (r + _RADIUS_SOFT)


def score_scales(
    f_bev_s: SkeletonMask,
    f_map_s: SkeletonMask,
    bins: ScaleBins,
    coarse_rotations: int = 8,
    temperature: float = 0.05,
    template_size: int | None = None,
    workers: int = 1,
) -> ScaleEstimate:
    """Score every candidate scale factor and blend them.

    The match is one sided. A ground scan sees only the building faces
    its rays reach, so at the right scale its strokes are a subset of the
    map's strokes, never the reverse; map content the scan cannot see
    must cost nothing. The map skeleton therefore becomes a falloff
    field, one at a stroke and decaying with distance, and a placement
    scores the mass-weighted mean falloff under the scan's strokes: the
    fraction of the scan the map explains, regardless of how much map
    the scan leaves unexplained.

    Per bin, the scan skeleton is blurred in proportion to the factor so
    decimation cannot erase strokes, rescaled (via rescale_bev), cropped
    to fit, and swept over a coarse rotation ladder and all translations
    via the matcher's correlation volume. The explained fraction is then
    centered on the local chance level, the mean falloff under the bin's
    content disc, so placements over dense map regions get no head start
    and partial overlaps hanging off the map edge self-penalize.

    A bin's score is its best centered fraction over the ladder and all
    translations, studentized against the spread of its own field:
    nearly every placement is wrong at every bin, so each field is its
    own chance calibration, and the studentized maximum asks how far the
    best placement stands above that bin's luck rather than comparing
    raw maxima whose chance envelopes differ with content size.

    Bins whose rescale window keeps too few independent stroke cells are
    excluded: with a handful of cells the field's spread no longer
    estimates anything and chance placements reach extreme studentized
    values. If no bin keeps enough, the vote abstains exactly like the
    empty case.

    Scores pass through a softmax at the given temperature and the
    weighted sum of the bin values is the continuous estimate. The
    temperature is in studentized-score units, roughly standard
    deviations of placement chance, so useful values sit well below
    one and the default keeps the vote close to the best bin.

    Skeletons with no content on either side cannot vote; they produce
    uniform weights and a low_confidence flag.
    """
    if temperature <= 0 or not math.isfinite(temperature):
        raise InvalidArgumentError(f"temperature must be positive, got {temperature!r}")
    for name, mask in (("scan", f_bev_s), ("map", f_map_s)):
        if mask.channels != 2:
            raise InvalidArgumentError(f"{name} skeleton must have 2 channels, got {mask.channels}")
    if f_bev_s.height != f_bev_s.width:
        raise InvalidArgumentError("scan skeleton must be square")

    n = len(bins)
    empty_tol = SKELETON_EPS * 1.5
    if f_bev_s.channel(1).max() <= empty_tol or f_map_s.channel(1).max() <= empty_tol:
        return _abstain(bins)

    fit = min(f_map_s.height, f_map_s.width, f_bev_s.height)
    if template_size is not None:
        if template_size < 1 or template_size > fit:
            raise InvalidArgumentError(
                f"template_size {template_size} does not fit map {f_map_s.height}x{f_map_s.width} "
                f"and scan {f_bev_s.height}"
            )
        fit = template_size

    # Falloff field: one on a map stroke, decaying with distance, so a
    # scan stroke reads how close it landed to the nearest map stroke.
    # It lives on the map side because the map is shared by every bin,
    # so the slack it grants cannot favor one bin.
    map_falloff = Grid2D(edge_falloff(f_map_s).channel(1)[:, :, None])
    angles = rotation_angles(coarse_rotations)

    bev_size = f_bev_s.height
    scan_thin = f_bev_s.channel(1)
    scores = np.zeros(n, dtype=np.float64)
    live: list[int] = []
    for i, s in enumerate(bins.values):
        # Only the source window that lands inside the crop carries
        # evidence: upsampling below 1 copies each of its cells into
        # perfectly correlated clones, and shrinking above 1 merges
        # them, so the window's own stroke mass is the honest count.
        window = min(_round_half_up(fit * s), bev_size)
        src = center_crop(f_bev_s, window)
        n_eff = float(np.sum(src.values[:, :, 1] ** 2))
        if n_eff < _MIN_EFFECTIVE_MASS:
            continue

        sigma_pre = _TEMPLATE_SIGMA * float(s)
        blurred = ndimage.gaussian_filter(scan_thin, sigma=sigma_pre, mode="constant", cval=0.0)
        rescaled = rescale_bev(Grid2D(blurred[:, :, None]), float(s))
        tmpl = center_crop(rescaled, fit)

        content = fit if s <= 1.0 else min(fit, _round_half_up(bev_size / float(s)))
        disc = _content_disc(fit, content)

        # Scale information lives at large radius: a wrong factor moves
        # a stroke off its map stroke by an offset proportional to the
        # stroke's distance from center, so inner strokes align under
        # nearly any factor and only dilute the vote. A saturating
        # radius weight points the explained fraction at the strokes
        # that distinguish neighbouring bins without letting a handful
        # of far strokes outvote a dense near field.
        footprint = disc * _radius_weight(fit)
        area = float(footprint.sum())
        t = tmpl.values[:, :, 0] * footprint
        t_grid = Grid2D(t[:, :, None])
        disc_grid = Grid2D(footprint[:, :, None])

        # nearest-neighbour rotation can duplicate or drop cells, so
        # the template mass is per rotation, not the unrotated one's
        masses = np.array(
            [max(float(rotate_feature(t_grid, ang).values.sum()), 1e-12) for ang in angles]
        )

        vol = score_volume(map_falloff, t_grid, coarse_rotations, workers=workers)
        matched = vol.scores * (fit * fit)  # undo the matcher's 1/T^2
        explained = matched / masses[:, None, None]

        # Center on the local chance level: the weighted mean falloff
        # under the bin's footprint is what a structureless template
        # would score, so subtracting it removes the head start of
        # dense map regions, and placements hanging off the map edge
        # go to zero on both sides instead of winning on a lucky sliver.
        rho = score_volume(map_falloff, disc_grid, 1, workers=workers).scores[0] * (fit * fit) / area
        excess = (explained - rho[None, :, :]) / np.maximum(1.0 - rho[None, :, :], 1e-9)

        # The raw maximum is not comparable across bins: every field's
        # best placement rides its own chance envelope, and smaller
        # content discs see more independent placements with noisier
        # per-placement fractions. Studentizing the maximum against the
        # field's own spread asks how far the best placement stands
        # above that bin's luck, which is comparable, because the
        # overwhelming majority of placements are wrong at every bin
        # and estimate the chance level cleanly.
        mean = float(excess.mean())
        std = max(float(excess.std()), 1e-12)
        live.append(i)
        scores[i] = (float(excess.max()) - mean) / std

    if not live:
        return _abstain(bins)

    shifted = scores / temperature
    shifted -= shifted.max()
    weights = np.exp(shifted)
    weights /= weights.sum()
    return ScaleEstimate(
        weights=weights,
        scale=float(np.dot(weights, bins.values)),
        scores=scores,
        low_confidence=False,
    )


def _abstain(bins: ScaleBins) -> ScaleEstimate:
    """Uniform vote over the ladder when no bin can be scored."""
    n = len(bins)
    weights = np.full(n, 1.0 / n)
    return ScaleEstimate(
        weights=weights,
        scale=float(np.dot(weights, bins.values)),
        scores=np.zeros(n),
        low_confidence=True,
    )
