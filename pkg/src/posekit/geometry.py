"""Homogeneous 2D affine transforms and the constrained R·L·S parameterization.

Conventions:
- Template space is [-1, 1]^2 with x rightward and y downward.
- Transforms act on column vectors: (x', y', 1)^T = m @ (x, y, 1)^T.
- rotation(theta) is [[cos, sin], [-sin, cos]], so rotation(pi/2) maps (1, 0) to (0, -1).
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

from .errors import NonPositiveScaleError, ScaleOutOfBoundsError, SingularTransformError

FloatArray = NDArray[np.float64]

SCALE_BOUNDS = (0.05, 20.0)
DET_TOLERANCE = 1e-12

# Sign pattern of F @ m @ F with F = diag(-1, 1, 1), top two rows only.
_FLIP_SIGNS = np.array([[1.0, -1.0, -1.0], [-1.0, 1.0, 1.0]])


class Point2(NamedTuple):
    """A 2D point in template units or pixels, depending on context."""

    x: float
    y: float


def normalize_angle(theta: float) -> float:
    """Map an angle to (-pi, pi]."""
    wrapped = math.remainder(theta, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


@dataclass(frozen=True, eq=False)
class AffineTransform:
    """A 3x3 homogeneous affine matrix with last row (0, 0, 1)."""

    m: FloatArray

    def __post_init__(self) -> None:
        m = np.array(self.m, dtype=np.float64)
        if m.shape != (3, 3):
            raise SingularTransformError(f"Affine matrix must be 3x3, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise SingularTransformError("Affine matrix has non-finite entries")
        if m[2, 0] != 0.0 or m[2, 1] != 0.0 or m[2, 2] != 1.0:
            raise SingularTransformError(f"Affine last row must be (0, 0, 1), got {m[2]}")
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if abs(det) <= DET_TOLERANCE:
            raise SingularTransformError(f"Affine linear block is singular (det={det:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @property
    def linear(self) -> FloatArray:
        return self.m[:2, :2]

    @property
    def offset(self) -> FloatArray:
        return self.m[:2, 2]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AffineTransform):
            return NotImplemented
        return bool(np.array_equal(self.m, other.m))

    def __hash__(self) -> int:
        return hash(self.m.tobytes())

    def allclose(self, other: "AffineTransform", atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.m, other.m, rtol=0.0, atol=atol))


@dataclass(frozen=True)
class ConstrainedTransformParams:
    """Limb-specific rotation and localization parameters.

    theta is normalized to (-pi, pi] on construction.
    """

    theta: float = 0.0
    mu: float = 0.0
    delta: float = 0.0

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.theta, self.mu, self.delta)):
            raise SingularTransformError("Constrained parameters must be finite")
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))


@dataclass(frozen=True)
class FrameScale:
    """Frame-specific scale shared by every limb of one frame."""

    phi: float = 1.0
    beta: float = 1.0

    def __post_init__(self) -> None:
        for name in ("phi", "beta"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0.0:
                raise NonPositiveScaleError(f"Frame scale {name} must be > 0, got {value}")
            lo, hi = SCALE_BOUNDS
            if not lo <= value <= hi:
                raise ScaleOutOfBoundsError(
                    f"Frame scale {name}={value} outside sanity bounds [{lo}, {hi}]"
                )


def from_rows(a: float, b: float, tx: float, c: float, d: float, ty: float) -> AffineTransform:
    """Build a transform from its top two rows."""
    return AffineTransform(np.array([[a, b, tx], [c, d, ty], [0.0, 0.0, 1.0]]))


def identity() -> AffineTransform:
    return AffineTransform(np.eye(3))


def translation(tx: float, ty: float) -> AffineTransform:
    return from_rows(1.0, 0.0, tx, 0.0, 1.0, ty)


def rotation(theta: float) -> AffineTransform:
    c, s = math.cos(theta), math.sin(theta)
    return from_rows(c, s, 0.0, -s, c, 0.0)


def scaling(sx: float, sy: float) -> AffineTransform:
    return from_rows(sx, 0.0, 0.0, 0.0, sy, 0.0)


def compose(a: AffineTransform, b: AffineTransform) -> AffineTransform:
    """Return a @ b (b is applied first)."""
    m = a.m @ b.m
    m[2] = (0.0, 0.0, 1.0)
    return AffineTransform(m)


def inverse(t: AffineTransform) -> AffineTransform:
    m = np.linalg.inv(t.m)
    m[2] = (0.0, 0.0, 1.0)
    return AffineTransform(m)


def apply(t: AffineTransform, p: Point2) -> Point2:
    """Apply a transform to a single point."""
    m = t.m
    return Point2(
        float(m[0, 0] * p.x + m[0, 1] * p.y + m[0, 2]),
        float(m[1, 0] * p.x + m[1, 1] * p.y + m[1, 2]),
    )


def apply_points(t: AffineTransform, points: FloatArray) -> FloatArray:
    """Apply a transform to an (N, 2) array of points."""
    return points @ t.linear.T + t.offset


def _constrained_rows(c: ConstrainedTransformParams, s: FrameScale) -> FloatArray:
    cos, sin = math.cos(c.theta), math.sin(c.theta)
    return np.array(
        [
            [s.phi * cos, s.beta * sin, cos * c.mu + sin * c.delta],
            [-s.phi * sin, s.beta * cos, -sin * c.mu + cos * c.delta],
            [0.0, 0.0, 1.0],
        ]
    )


def build_constrained(c: ConstrainedTransformParams, s: FrameScale) -> AffineTransform:
    """Build R(theta) @ L(mu, delta) @ S(phi, beta).

    Scaling is applied first, then localization, then rotation.

    Raises:
        NonPositiveScaleError: If phi or beta is not positive.
    """
    if s.phi <= 0.0 or s.beta <= 0.0:
        raise NonPositiveScaleError(f"Frame scale must be positive, got ({s.phi}, {s.beta})")
    return AffineTransform(_constrained_rows(c, s))


def build_rigid(c: ConstrainedTransformParams) -> AffineTransform:
    """Build R(theta) @ L(mu, delta), the unscaled constrained matrix."""
    return AffineTransform(_constrained_rows(c, FrameScale(1.0, 1.0)))


def constrained_matrix_derivatives(c: ConstrainedTransformParams, s: FrameScale) -> FloatArray:
    """Partials of build_constrained w.r.t. (theta, mu, delta, phi, beta).

    Returns:
        Array of shape (5, 3, 3); the last row of each partial is zero.
    """
    if s.phi <= 0.0 or s.beta <= 0.0:
        raise NonPositiveScaleError(f"Frame scale must be positive, got ({s.phi}, {s.beta})")
    cos, sin = math.cos(c.theta), math.sin(c.theta)
    d = np.zeros((5, 3, 3))
    d[0, 0] = (-s.phi * sin, s.beta * cos, -sin * c.mu + cos * c.delta)
    d[0, 1] = (-s.phi * cos, -s.beta * sin, -cos * c.mu - sin * c.delta)
    d[1, 0, 2], d[1, 1, 2] = cos, -sin
    d[2, 0, 2], d[2, 1, 2] = sin, cos
    d[3, 0, 0], d[3, 1, 0] = cos, -sin
    d[4, 0, 1], d[4, 1, 1] = sin, cos
    return d


def constrained_jacobian(c: ConstrainedTransformParams, s: FrameScale, p: Point2) -> FloatArray:
    """Jacobian of apply(build_constrained(c, s), p) w.r.t. (theta, mu, delta, phi, beta).

    Returns:
        Array of shape (2, 5).
    """
    d = constrained_matrix_derivatives(c, s)
    homogeneous = np.array([p.x, p.y, 1.0])
    return (d[:, :2, :] @ homogeneous).T


def flip_transform(t: AffineTransform) -> AffineTransform:
    """Conjugate by the mirror F = diag(-1, 1, 1): returns F @ t @ F.

    Implemented as an exact sign flip so flip_transform is an involution.
    """
    m = np.array(t.m)
    m[:2] = m[:2] * _FLIP_SIGNS
    return AffineTransform(m)


def template_to_pixel(width: int, height: int) -> AffineTransform:
    """Map template units [-1, 1]^2 onto pixel centers 0..W-1, 0..H-1."""
    sx = (width - 1) / 2.0
    sy = (height - 1) / 2.0
    return from_rows(sx, 0.0, sx, 0.0, sy, sy)
