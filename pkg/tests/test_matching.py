import math

import numpy as np
import pytest

from scanloc.errors import InvalidArgumentError, OracleGuardError
from scanloc.geometry import Grid2D
from scanloc.matching import (
    PoseEstimate,
    ProbabilityVolume,
    ScoreVolume,
    brute_force_score_volume,
    estimate_pose,
    fuse_probability,
    rotate_feature,
    rotation_angles,
    score_volume,
    skeleton_score_volume,
)


def random_grid(rng, h, w, c):
    return Grid2D(rng.standard_normal((h, w, c)))


class TestRotationAngles:
    def test_four_slots(self):
        assert np.allclose(rotation_angles(4), [-math.pi, -math.pi / 2, 0.0, math.pi / 2])

    def test_single_slot_is_half_turn(self):
        assert np.allclose(rotation_angles(1), [-math.pi])

    def test_strictly_increasing(self):
        angles = rotation_angles(64)
        assert np.all(np.diff(angles) > 0)
        assert len(angles) == 64

    def test_rejects_zero(self):
        with pytest.raises(InvalidArgumentError):
            rotation_angles(0)


class TestRotateFeature:
    def test_zero_angle_identity(self):
        rng = np.random.default_rng(0)
        f = random_grid(rng, 6, 6, 2)
        out = rotate_feature(f, 0.0)
        assert np.array_equal(out.values, f.values)

    def test_quarter_turn_is_lattice_permutation(self):
        rng = np.random.default_rng(1)
        f = random_grid(rng, 7, 7, 3)
        out = rotate_feature(f, math.pi / 2)
        n = 7
        expected = np.empty_like(f.values)
        for r in range(n):
            for c in range(n):
                expected[r, c] = f.values[n - 1 - c, r]
        assert np.array_equal(out.values, expected)

    def test_quarter_turn_moves_offsets_counterclockwise(self):
        # (du, dv) -> (-dv, du) about the center, in (u, v) = (col, row).
        f = np.zeros((5, 5, 1))
        f[1, 4, 0] = 1.0  # offset (du, dv) = (2, -1)
        out = rotate_feature(Grid2D(f), math.pi / 2)
        assert out.values[4, 3, 0] == 1.0  # offset (1, 2)
        assert out.values.sum() == 1.0

    def test_four_quarter_turns_compose_to_identity(self):
        rng = np.random.default_rng(2)
        f = random_grid(rng, 8, 8, 2)
        out = f
        for _ in range(4):
            out = rotate_feature(out, math.pi / 2)
        assert np.array_equal(out.values, f.values)

    def test_half_turn_twice_is_identity(self):
        rng = np.random.default_rng(3)
        f = random_grid(rng, 6, 6, 1)
        out = rotate_feature(rotate_feature(f, math.pi), math.pi)
        assert np.array_equal(out.values, f.values)

    def test_generic_angle_center_fixed(self):
        rng = np.random.default_rng(4)
        f = random_grid(rng, 9, 9, 2)
        out = rotate_feature(f, 0.37)
        assert np.array_equal(out.values[4, 4], f.values[4, 4])

    def test_generic_angle_values_drawn_from_source(self):
        rng = np.random.default_rng(5)
        f = random_grid(rng, 7, 7, 1)
        out = rotate_feature(f, 1.1)
        produced = set(out.values.ravel()) - {0.0}
        assert produced <= set(f.values.ravel())

    def test_rejects_non_square(self):
        with pytest.raises(InvalidArgumentError):
            rotate_feature(Grid2D(np.zeros((4, 6, 1))), 0.1)


class TestScoreVolumeAgainstOracle:
    @pytest.mark.parametrize("n_rot", [1, 4, 8])
    @pytest.mark.parametrize("t", [5, 6])
    def test_fft_matches_brute_force(self, n_rot, t):
        rng = np.random.default_rng(100 * n_rot + t)
        f_map = random_grid(rng, 20, 18, 3)
        f_bev = random_grid(rng, t, t, 3)
        fast = score_volume(f_map, f_bev, n_rot)
        slow = brute_force_score_volume(f_map, f_bev, n_rot)
        assert fast.scores.shape == (n_rot, 20, 18)
        assert np.allclose(fast.scores, slow.scores, atol=1e-9)
        assert np.array_equal(fast.angles, slow.angles)

    def test_worker_count_does_not_change_scores(self):
        rng = np.random.default_rng(6)
        f_map = random_grid(rng, 24, 24, 4)
        f_bev = random_grid(rng, 8, 8, 4)
        a = score_volume(f_map, f_bev, 8, workers=1)
        b = score_volume(f_map, f_bev, 8, workers=4)
        assert np.allclose(a.scores, b.scores, atol=1e-12)


class TestScoreVolumeSemantics:
    def test_single_cell_template(self):
        rng = np.random.default_rng(7)
        f_map = random_grid(rng, 8, 8, 2)
        tmpl = np.array([[[0.5, -2.0]]])
        vol = score_volume(f_map, Grid2D(tmpl), n_rot=4)
        expected = 0.5 * f_map.values[:, :, 0] - 2.0 * f_map.values[:, :, 1]
        for i in range(4):
            assert np.allclose(vol.scores[i], expected, atol=1e-12)

    def test_planted_template_peaks_at_plant_site(self):
        rng = np.random.default_rng(8)
        tmpl = rng.uniform(0.1, 1.0, size=(5, 5, 1))
        grid = np.zeros((16, 16, 1))
        a, b = 9, 6
        grid[a - 2 : a + 3, b - 2 : b + 3] = tmpl
        vol = score_volume(Grid2D(grid), Grid2D(tmpl), n_rot=4)
        i, r, c = np.unravel_index(np.argmax(vol.scores), vol.scores.shape)
        assert (i, r, c) == (2, a, b)  # slot 2 is angle 0
        assert vol.scores[i, r, c] == pytest.approx(np.sum(tmpl * tmpl) / 25.0)

    def test_border_scores_attenuated(self):
        ones_map = Grid2D(np.ones((12, 12, 1)))
        ones_tmpl = Grid2D(np.ones((5, 5, 1)))
        vol = score_volume(ones_map, ones_tmpl, n_rot=1)
        assert vol.scores[0, 6, 6] == pytest.approx(1.0)
        # Corner placement overlaps only 3x3 of the 5x5 template.
        assert vol.scores[0, 0, 0] == pytest.approx(9.0 / 25.0)

    def test_rejects_channel_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            score_volume(Grid2D(np.zeros((8, 8, 2))), Grid2D(np.zeros((4, 4, 3))), 4)

    def test_rejects_oversized_template(self):
        with pytest.raises(InvalidArgumentError):
            score_volume(Grid2D(np.zeros((4, 4, 1))), Grid2D(np.zeros((6, 6, 1))), 4)

    def test_skeleton_wrapper_requires_two_channels(self):
        with pytest.raises(InvalidArgumentError):
            skeleton_score_volume(Grid2D(np.zeros((8, 8, 3))), Grid2D(np.zeros((4, 4, 3))), 4)

    def test_oracle_guard(self):
        big = Grid2D(np.zeros((65, 65, 1)))
        with pytest.raises(OracleGuardError):
            brute_force_score_volume(big, Grid2D(np.zeros((4, 4, 1))), 1)


class TestFuseAndEstimate:
    def _volumes(self, rng, n_rot=4, h=6, w=6):
        angles = rotation_angles(n_rot)
        omega = ScoreVolume(rng.standard_normal((n_rot, h, w)), angles)
        psi = ScoreVolume(rng.standard_normal((n_rot, h, w)), angles)
        return omega, psi

    def test_probabilities_sum_to_one(self):
        omega, psi = self._volumes(np.random.default_rng(9))
        p = fuse_probability(omega, psi)
        assert p.probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert p.probs.min() > 0

    def test_shift_invariance(self):
        omega, psi = self._volumes(np.random.default_rng(10))
        p = fuse_probability(omega, psi)
        shifted = ScoreVolume(omega.scores + 37.5, omega.angles)
        q = fuse_probability(shifted, psi)
        assert np.allclose(p.probs, q.probs, atol=1e-9)

    def test_rejects_mismatched_shapes(self):
        omega, _ = self._volumes(np.random.default_rng(11))
        other = ScoreVolume(np.zeros((4, 5, 6)), rotation_angles(4))
        with pytest.raises(InvalidArgumentError):
            fuse_probability(omega, other)

    def test_estimate_reads_argmax(self):
        probs = np.zeros((4, 3, 5))
        probs[1, 2, 4] = 1.0
        p = ProbabilityVolume(probs, rotation_angles(4))
        est = estimate_pose(p)
        assert isinstance(est, PoseEstimate)
        assert est.pose.u == 4.0 and est.pose.v == 2.0
        assert est.pose.theta == pytest.approx(-math.pi / 2)
        assert est.rotation_index == 1
        assert est.confidence == pytest.approx(1.0)

    def test_tie_breaks_to_first_linear_index(self):
        probs = np.zeros((2, 2, 2))
        probs[0, 1, 1] = 0.5
        probs[1, 0, 0] = 0.5
        p = ProbabilityVolume(probs, rotation_angles(2))
        est = estimate_pose(p)
        assert est.rotation_index == 0
        assert (est.pose.v, est.pose.u) == (1.0, 1.0)

    def test_uniform_volume_picks_slot_zero_and_wraps_angle(self):
        n = 4
        probs = np.full((n, 2, 2), 1.0 / (n * 4))
        est = estimate_pose(ProbabilityVolume(probs, rotation_angles(n)))
        assert est.rotation_index == 0
        # Slot 0 carries -pi; poses canonicalize that endpoint to +pi.
        assert est.pose.theta == pytest.approx(math.pi)


class TestVolumeValidation:
    def test_scores_reject_decreasing_angles(self):
        with pytest.raises(InvalidArgumentError):
            ScoreVolume(np.zeros((2, 3, 3)), np.array([0.5, -0.5]))

    def test_probs_reject_negative(self):
        bad = np.full((1, 2, 2), 0.25)
        bad[0, 0, 0] = -0.25
        bad[0, 1, 1] = 0.75
        with pytest.raises(InvalidArgumentError):
            ProbabilityVolume(bad, rotation_angles(1))

    def test_probs_reject_bad_total(self):
        with pytest.raises(InvalidArgumentError):
            ProbabilityVolume(np.full((1, 2, 2), 0.3), rotation_angles(1))
