import numpy as np
import pytest

from scanloc.errors import InvalidArgumentError
from scanloc.thinning import zhang_suen_thin


def test_single_pixel_line_unchanged():
    mask = np.zeros((9, 9), dtype=np.uint8)
    mask[4, 1:8] = 1
    assert np.array_equal(zhang_suen_thin(mask), mask)


def test_filled_square_shrinks():
    mask = np.zeros((11, 11), dtype=np.uint8)
    mask[1:10, 1:10] = 1
    thin = zhang_suen_thin(mask)
    assert 0 < thin.sum() < mask.sum()
    # Result is a subset of the input foreground.
    assert np.all(mask[thin == 1] == 1)


def test_idempotent():
    rng = np.random.default_rng(3)
    mask = (rng.random((40, 40)) < 0.4).astype(np.uint8)
    once = zhang_suen_thin(mask)
    twice = zhang_suen_thin(once)
    assert np.array_equal(once, twice)


def test_empty_stays_empty():
    mask = np.zeros((5, 5), dtype=np.uint8)
    assert zhang_suen_thin(mask).sum() == 0


def test_rejects_wrong_rank():
    with pytest.raises(InvalidArgumentError):
        zhang_suen_thin(np.zeros((3, 3, 2)))


def test_thick_line_reduces_to_thin_line():
    mask = np.zeros((12, 30), dtype=np.uint8)
    mask[4:7, 2:28] = 1
    thin = zhang_suen_thin(mask)
    # The stroke interior collapses to one pixel per column; the ends may
    # erode by a pixel or two.
    cols = thin.sum(axis=0)
    assert np.all(cols <= 1)
    assert np.all(cols[5:25] == 1)
    rows = np.nonzero(thin)[0]
    assert set(rows) <= {4, 5, 6}
