"""Tests for pfm module."""

import numpy as np
import pytest

from posekit.errors import SchemaError
from posekit.pfm import list_stems, read_heatmap, read_pfm, write_heatmap, write_pfm
from posekit.rendering import render


class TestPfm:
    """Tests for write_pfm and read_pfm."""

    def test_header(self, tmp_path):
        """Should write a little-endian grayscale header."""
        path = write_pfm(tmp_path / "a.pfm", np.zeros((3, 5)))
        raw = path.read_bytes()
        assert raw.startswith(b"Pf\n5 3\n-1.0\n")
        assert len(raw) == len(b"Pf\n5 3\n-1.0\n") + 3 * 5 * 4

    def test_rows_stored_bottom_up(self, tmp_path):
        """Should store the last image row first."""
        grid = np.zeros((2, 3))
        grid[0] = 1.0
        raw = write_pfm(tmp_path / "a.pfm", grid).read_bytes()
        body = np.frombuffer(raw[len(b"Pf\n3 2\n-1.0\n") :], dtype="<f4")
        assert body[:3].tolist() == [0.0, 0.0, 0.0]
        assert body[3:].tolist() == [1.0, 1.0, 1.0]

    def test_round_trip_float32(self, tmp_path, rng):
        """Should read back the grid at float32 precision, top row first."""
        grid = rng.uniform(size=(7, 9))
        back = read_pfm(write_pfm(tmp_path / "a.pfm", grid))
        assert np.allclose(back, grid, atol=1e-7)

    def test_malformed_header(self, tmp_path):
        """Should raise SchemaError for a non-PFM file."""
        path = tmp_path / "bad.pfm"
        path.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
        with pytest.raises(SchemaError, match="Pf"):
            read_pfm(path)

    def test_truncated_raster(self, tmp_path):
        """Should raise SchemaError when the raster is short."""
        path = tmp_path / "short.pfm"
        path.write_bytes(b"Pf\n2 2\n-1.0\n\x00\x00\x00\x00")
        with pytest.raises(SchemaError, match="expected 16"):
            read_pfm(path)


class TestHeatmapFiles:
    """Tests for write_heatmap, read_heatmap and list_stems."""

    def test_one_file_per_channel(self, t_new, tmp_path):
        """Should write 19 channel files for a template render."""
        paths = write_heatmap(render(t_new), tmp_path, "t_new")
        assert len(paths) == 19
        assert {p.name for p in paths} >= {"t_new.core.pfm", "t_new.composite.pfm"}
        assert list_stems(tmp_path) == ["t_new"]

    def test_read_back_channels(self, t_new, tmp_path):
        """Should restore the named channels in order."""
        heatmap = render(t_new, composite=False)
        write_heatmap(heatmap, tmp_path, "frame_0001")
        back = read_heatmap(tmp_path, "frame_0001", heatmap.channel_names)
        assert back.channel_names == heatmap.channel_names
        assert np.allclose(back.data, heatmap.data, atol=1e-7)

    def test_missing_channel(self, t_new, tmp_path):
        """Should raise SchemaError when a channel file is absent."""
        heatmap = render(t_new, composite=False)
        paths = write_heatmap(heatmap, tmp_path, "f")
        paths[3].unlink()
        with pytest.raises(SchemaError, match="missing"):
            read_heatmap(tmp_path, "f", heatmap.channel_names)

    def test_stems_sorted(self, t_new, tmp_path):
        """Should list every frame stem once, sorted."""
        heatmap = render(t_new, composite=False)
        for stem in ("s01_0002", "s01_0000", "s01_0001"):
            write_heatmap(heatmap, tmp_path, stem)
        assert list_stems(tmp_path) == ["s01_0000", "s01_0001", "s01_0002"]
