"""Morphological thinning of binary masks (Zhang-Suen).

The two-subpass algorithm peels boundary pixels that have between 2 and 6
set neighbours, exactly one 0->1 transition around the 8-neighbourhood,
and the directional clearance conditions of the respective subpass. It is
iterated to a fixpoint, so applying it to its own output changes nothing.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError

__all__ = ["zhang_suen_thin"]


def _neighbours(padded: np.ndarray) -> list[np.ndarray]:
    """Neighbour planes P2..P9, clockwise starting north, for the core
    region of a zero-padded binary image."""
    p2 = padded[:-2, 1:-1]
    p3 = padded[:-2, 2:]
    p4 = padded[1:-1, 2:]
    p5 = padded[2:, 2:]
    p6 = padded[2:, 1:-1]
    p7 = padded[2:, :-2]
    p8 = padded[1:-1, :-2]
    p9 = padded[:-2, :-2]
    return [p2, p3, p4, p5, p6, p7, p8, p9]


def _subpass(img: np.ndarray, first: bool) -> int:
    padded = np.pad(img, 1, mode="constant")
    p2, p3, p4, p5, p6, p7, p8, p9 = _neighbours(padded)
    ring = [p2, p3, p4, p5, p6, p7, p8, p9, p2]
    b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9
    a = np.zeros_like(b)
    for cur, nxt in zip(ring[:-1], ring[1:]):
        a += (cur == 0) & (nxt == 1)
    if first:
        clear1 = p2 * p4 * p6 == 0
        clear2 = p4 * p6 * p8 == 0
    else:
        clear1 = p2 * p4 * p8 == 0
        clear2 = p2 * p6 * p8 == 0
    remove = (img == 1) & (b >= 2) & (b <= 6) & (a == 1) & clear1 & clear2
    img[remove] = 0
    return int(remove.sum())


def zhang_suen_thin(mask: np.ndarray) -> np.ndarray:
    """Thin a binary mask to its one-pixel-wide skeleton.

    Args:
        mask: 2-D array; nonzero entries are foreground.

    Returns:
        uint8 array of the same shape with the thinned foreground.
    """
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise InvalidArgumentError(f"thinning expects a 2-D mask, got shape {arr.shape}")
    img = (arr != 0).astype(np.uint8)
    while True:
        changed = _subpass(img, first=True)
        changed += _subpass(img, first=False)
        if changed == 0:
            return img
