"""Portable float map (PFM) reading and writing.

Single-channel "Pf" files, little-endian (scale -1.0), rows stored bottom-up.
A heatmap is written as one file per channel: <stem>.<channel>.pfm.
"""

import logging
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .geometry import FloatArray
from .rendering import Heatmap

logger = logging.getLogger(__name__)


def write_pfm(path: Path, grid: FloatArray) -> Path:
    """Write a 2D grid as a little-endian grayscale PFM."""
    if grid.ndim != 2:
        raise ValueError(f"PFM grid must be 2D, got shape {grid.shape}")
    height, width = grid.shape
    header = f"Pf\n{width} {height}\n-1.0\n".encode("ascii")
    raster = np.flipud(np.asarray(grid)).astype("<f4").tobytes()
    path.write_bytes(header + raster)
    return path


def read_pfm(path: Path) -> FloatArray:
    """Read a grayscale PFM into a top-down float64 grid.

    Raises:
        SchemaError: If the header or raster is malformed.
    """
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise SchemaError(f"cannot read {path}: {e}") from e
    lines = raw.split(b"\n", 3)
    if len(lines) < 4 or lines[0].strip() != b"Pf":
        raise SchemaError(f"{path}: not a grayscale PFM (expected 'Pf' header)")
    try:
        width, height = (int(v) for v in lines[1].split())
        scale = float(lines[2])
    except ValueError as e:
        raise SchemaError(f"{path}: malformed PFM header: {e}") from e
    dtype = "<f4" if scale < 0 else ">f4"
    body = lines[3]
    if len(body) != width * height * 4:
        raise SchemaError(f"{path}: raster has {len(body)} bytes, expected {width * height * 4}")
    grid = np.frombuffer(body, dtype=dtype).reshape(height, width)
    return np.flipud(grid).astype(np.float64)


def heatmap_paths(out_dir: Path, stem: str, channel_names: tuple[str, ...]) -> list[Path]:
    return [out_dir / f"{stem}.{name}.pfm" for name in channel_names]


def write_heatmap(heatmap: Heatmap, out_dir: Path, stem: str) -> list[Path]:
    """Write every channel of a heatmap to <out_dir>/<stem>.<channel>.pfm."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = heatmap_paths(out_dir, stem, heatmap.channel_names)
    for path, grid in zip(paths, heatmap.data, strict=True):
        write_pfm(path, grid)
    logger.debug(f"Wrote {len(paths)} PFM channels for '{stem}' to {out_dir}")
    return paths


def read_heatmap(in_dir: Path, stem: str, channel_names: tuple[str, ...]) -> Heatmap:
    """Read the named channels of <stem> back into a Heatmap.

    Raises:
        SchemaError: If a channel file is missing, malformed, or sizes differ.
    """
    grids = []
    for path in heatmap_paths(in_dir, stem, channel_names):
        if not path.exists():
            raise SchemaError(f"missing heatmap channel file {path}")
        grids.append(read_pfm(path))
    if len({g.shape for g in grids}) > 1:
        raise SchemaError(f"channel sizes differ for '{stem}'")
    data = np.clip(np.stack(grids), 0.0, 1.0)
    return Heatmap(data, channel_names)


def list_stems(in_dir: Path) -> list[str]:
    """Distinct <stem> values among <stem>.<channel>.pfm files, sorted."""
    return sorted({p.name.rsplit(".", 2)[0] for p in in_dir.glob("*.*.pfm")})
