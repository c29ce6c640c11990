"""Shared fixtures for posekit tests."""

import numpy as np
import pytest

from posekit.annotations import FrameAnnotation
from posekit.body import KEYPOINT_NAMES
from posekit.coarse2fine import MATRIX_COUNTS, Parameterization, TransformMode, TransformSet
from posekit.geometry import Point2
from posekit.template import TemplateSpec, load_template


@pytest.fixture
def t_new() -> TemplateSpec:
    """Arms-down template on a 64x64 canvas."""
    return load_template("t_new").with_canvas(64, 64)


@pytest.fixture
def t_orig() -> TemplateSpec:
    """Arms-out template on a 64x64 canvas."""
    return load_template("t_orig").with_canvas(64, 64)


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator so randomized checks are reproducible."""
    return np.random.default_rng(1234)


def _annotation(
    points: dict[str, tuple[float, float]] | np.ndarray,
    frame_id: str = "f0000",
    size: tuple[int, int] = (256, 256),
) -> FrameAnnotation:
    """Build an annotation from a name->xy mapping or a (15, 2) array in KEYPOINT_NAMES order."""
    if isinstance(points, np.ndarray):
        rows = zip(KEYPOINT_NAMES, points, strict=True)
        points = {name: (float(x), float(y)) for name, (x, y) in rows}
    return FrameAnnotation(
        frame_id=frame_id,
        image_size=size,
        keypoints={name: Point2(*xy) for name, xy in points.items()},
    )


@pytest.fixture
def make_annotation():
    """Factory for FrameAnnotation objects from plain coordinates."""
    return _annotation


def _transform_set(
    rng: np.random.Generator,
    mode: TransformMode,
    parameterization: Parameterization,
    spread: float = 0.05,
) -> TransformSet:
    """A random TransformSet near the identity."""
    n = MATRIX_COUNTS[mode]
    if parameterization is Parameterization.FULL_AFFINE:
        base = np.tile([1.0, 0.0, 0.0, 0.0, 1.0, 0.0], n)
        vector = base + rng.normal(scale=spread, size=6 * n)
        return TransformSet.from_vector(mode, parameterization, vector)
    limbs = rng.normal(scale=spread, size=3 * n)
    scale = 1.0 + rng.uniform(-spread, spread, size=2)
    return TransformSet.from_vector(mode, parameterization, np.concatenate([limbs, scale]))


@pytest.fixture
def make_transform_set():
    """Factory for random transform sets near the identity."""
    return _transform_set
