"""Tests for flip module."""

import numpy as np
import pytest

from posekit.body import KEYPOINT_NAMES
from posekit.coarse2fine import default_mapping
from posekit.flip import flip_annotation, flip_heatmap, flip_mapping, flip_pose, flip_template
from posekit.geometry import Point2
from posekit.rendering import render
from posekit.template import identity_pose


class TestFlipTemplate:
    """Tests for flip_template function."""

    def test_involution(self, t_orig, t_new):
        """Should return the original template when applied twice."""
        assert flip_template(flip_template(t_orig)) == t_orig
        assert flip_template(flip_template(t_new)) == t_new

    def test_swaps_names_keeps_ids(self, t_new):
        """Should rename sided parts and keep ids in place."""
        flipped = flip_template(t_new)
        assert flipped.part(12).name == "right_hand"
        assert flipped.part(15).name == "left_hand"
        assert flipped.part(1).name == "core"

    def test_wrist_lookup(self, t_new):
        """Should resolve the flipped left wrist to the mirrored right-hand anchor."""
        flipped = flip_template(t_new)
        assert flipped.keypoint_map["left_wrist"] == t_new.keypoint_map["right_wrist"]
        part_id, end = flipped.keypoint_map["left_wrist"]
        assert flipped.part(part_id).name == "left_forearm"
        right_hand = t_new.part(15).head
        assert getattr(flipped.part(part_id), end) == Point2(-right_hand.x, right_hand.y)

    def test_render_mirrors_columns(self, t_orig):
        """Should render as the column-reversed render of the original."""
        direct = render(flip_template(t_orig))
        mirrored = render(t_orig).data[:, :, ::-1]
        assert np.allclose(direct.data, mirrored, atol=1e-12)

    def test_render_matches_flip_heatmap(self, t_new):
        """Should line up channel names with flip_heatmap of the original render."""
        direct = render(flip_template(t_new))
        flipped = flip_heatmap(render(t_new))
        assert direct.channel_names == flipped.channel_names
        assert np.allclose(direct.data, flipped.data, atol=1e-12)

    def test_flips_mapping(self, t_new):
        """Should flip an attached part mapping."""
        with_mapping = t_new.model_copy(update={"mapping": default_mapping()})
        flipped = flip_template(with_mapping)
        assert flipped.mapping == flip_mapping(default_mapping())
        assert flipped.mapping.coarse[10] == ("right_upper_arm", "right_forearm", "right_hand")


class TestFlipAnnotation:
    """Tests for flip_annotation function."""

    def test_mirror_and_swap(self, make_annotation):
        """Should mirror x within the frame and swap sided names."""
        points = {name: (float(i), 2.0 * i) for i, name in enumerate(KEYPOINT_NAMES)}
        a = make_annotation(points, size=(100, 80))
        flipped = flip_annotation(a)
        assert flipped.flipped is True
        wrist_x, wrist_y = points["left_wrist"]
        assert flipped.keypoints["right_wrist"] == Point2(99.0 - wrist_x, wrist_y)
        assert flipped.keypoints["chest"] == Point2(99.0 - points["chest"][0], points["chest"][1])

    def test_involution_exact(self, make_annotation, rng):
        """Should restore the original record bit-for-bit when applied twice."""
        a = make_annotation(rng.uniform(0, 255, size=(15, 2)))
        assert flip_annotation(flip_annotation(a)) == a

    def test_centre_fixed(self, make_annotation):
        """Should leave points on the centre column in place."""
        points = {name: (49.5, float(i)) for i, name in enumerate(KEYPOINT_NAMES)}
        a = make_annotation(points, size=(100, 100))
        assert flip_annotation(a).keypoints["neck"] == a.keypoints["neck"]


class TestFlipPose:
    """Tests for flip_pose function."""

    def test_negates_shear(self, t_new):
        """Should negate each covariance's off-diagonal term."""
        pose = identity_pose(t_new)
        flipped = flip_pose(pose)
        for part_id, (sxx, sxy, syy) in pose.covariances.items():
            assert flipped.covariances[part_id] == (sxx, -sxy, syy)

    def test_matches_flipped_template(self, t_orig):
        """Should agree with the identity pose of the mirrored template."""
        flipped = flip_pose(identity_pose(t_orig))
        mirrored = identity_pose(flip_template(t_orig))
        for name in KEYPOINT_NAMES:
            assert flipped.keypoints[name].x == pytest.approx(mirrored.keypoints[name].x, abs=1e-12)
            assert flipped.keypoints[name].y == pytest.approx(mirrored.keypoints[name].y, abs=1e-12)


class TestFlipHeatmap:
    """Tests for flip_heatmap function."""

    def test_keeps_order_swaps_names(self, t_new):
        """Should keep channel order and swap sided names."""
        heatmap = render(t_new)
        flipped = flip_heatmap(heatmap)
        assert flipped.channel_names[1] == "right_hip"
        assert flipped.channel_names[-1] == "composite"
        assert np.array_equal(flip_heatmap(flipped).data, heatmap.data)
