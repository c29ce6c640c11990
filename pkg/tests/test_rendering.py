"""Tests for rendering module."""

import numpy as np
import pytest

from posekit.errors import DegeneratePartError, DimMismatchError
from posekit.geometry import Point2
from posekit.rendering import COMPOSITE, Heatmap, render
from posekit.template import Canvas, PoseEstimate


def single_part_pose(
    center: tuple[float, float],
    cov: tuple[float, float, float],
    size: int = 64,
    half_length: float = 0.0,
) -> PoseEstimate:
    """A one-part pose centred at `center` with the given pixel covariance."""
    cx, cy = center
    return PoseEstimate(
        canvas=Canvas(width=size, height=size),
        part_names={1: "core"},
        part_anchors={1: (Point2(cx - half_length, cy), Point2(cx + half_length, cy))},
        covariances={1: cov},
        keypoints={},
    )


class TestHeatmap:
    """Tests for Heatmap validation."""

    def test_rejects_out_of_range(self):
        """Should reject values above 1."""
        with pytest.raises(ValueError):
            Heatmap(np.full((1, 2, 2), 1.5), ("core",))

    def test_rejects_channel_count(self):
        """Should reject a name count that differs from the channel count."""
        with pytest.raises(DimMismatchError):
            Heatmap(np.zeros((2, 2, 2)), ("core",))

    def test_read_only(self):
        """Should freeze the underlying array."""
        heatmap = Heatmap(np.zeros((1, 2, 2)), ("core",))
        with pytest.raises(ValueError):
            heatmap.data[0, 0, 0] = 0.5


class TestRender:
    """Tests for render function."""

    def test_template_channels(self, t_new):
        """Should render 18 part channels plus the composite."""
        heatmap = render(t_new)
        assert heatmap.data.shape == (19, 64, 64)
        assert heatmap.channel_names[:18] == tuple(p.name for p in t_new.parts)
        assert heatmap.channel_names[-1] == COMPOSITE

    def test_values_in_unit_interval(self, t_orig):
        """Should keep every value within [0, 1]."""
        heatmap = render(t_orig)
        assert heatmap.data.min() >= 0.0
        assert heatmap.data.max() <= 1.0

    def test_composite_is_channel_max(self, t_new):
        """Should set the composite to the per-pixel maximum of the parts."""
        heatmap = render(t_new)
        assert np.array_equal(heatmap.channel(COMPOSITE), heatmap.data[:-1].max(axis=0))

    def test_without_composite(self, t_new):
        """Should omit the composite when asked."""
        assert not render(t_new, composite=False).has_composite

    def test_isotropic_peak(self):
        """Should peak at exactly 1.0 on the centre pixel."""
        heatmap = render(single_part_pose((20.0, 30.0), (4.0, 0.0, 4.0)), composite=False)
        channel = heatmap.channel("core")
        assert channel[30, 20] == 1.0
        assert channel[30, 21] == pytest.approx(np.exp(-1.0 / 8.0))
        assert np.unravel_index(np.argmax(channel), channel.shape) == (30, 20)

    def test_translation_equivariance(self):
        """Should shift the image by whole-pixel translations of the part."""
        cov = (9.0, 2.0, 5.0)
        base = render(single_part_pose((30.3, 28.7), cov), composite=False).channel("core")
        moved = render(single_part_pose((33.3, 30.7), cov), composite=False).channel("core")
        assert np.allclose(moved[2:, 3:], base[:-2, :-3], atol=1e-12)

    def test_quarter_turn_equivariance(self):
        """Should match np.rot90 of the render for a part turned a quarter turn in place."""
        a, b, d = 30.0, 8.0, 6.0
        base = render(single_part_pose((31.5, 31.5), (a, b, d)), composite=False).channel("core")
        turned = render(single_part_pose((31.5, 31.5), (d, -b, a)), composite=False).channel("core")
        assert np.allclose(turned, np.rot90(base), atol=1e-12)

    def test_windowed_matches_full(self, t_new):
        """Should agree with full evaluation within the window tolerance."""
        full = render(t_new)
        windowed = render(t_new, windowed=True)
        assert np.max(np.abs(full.data - windowed.data)) <= 1e-9

    def test_degenerate_covariance(self):
        """Should raise DegeneratePartError for a near-singular covariance."""
        with pytest.raises(DegeneratePartError, match="core"):
            render(single_part_pose((10.0, 10.0), (1.0, 0.0, 1e-10)))

    def test_canvas_override(self, t_new):
        """Should render the template on an explicit canvas."""
        heatmap = render(t_new, canvas=Canvas(width=40, height=30))
        assert heatmap.data.shape == (19, 30, 40)
