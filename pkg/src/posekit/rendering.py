"""Gaussian heatmap rendering of templates and poses.

Channel c at pixel q is exp(-1/2 (q - mu_c)^T Sigma_c^-1 (q - mu_c)) with mu_c
the midpoint of the part's anchors and Sigma_c its pixel-space covariance.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePartError, DimMismatchError
from .geometry import FloatArray
from .template import Canvas, PoseEstimate, TemplateSpec, identity_pose

logger = logging.getLogger(__name__)

COMPOSITE = "composite"
MAX_CONDITION = 1e8
WINDOW_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class Heatmap:
    """Multi-channel float grid with values in [0, 1], shape (C, H, W)."""

    data: FloatArray
    channel_names: tuple[str, ...]

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise DimMismatchError(f"heatmap data must be (C, H, W), got shape {data.shape}")
        if data.shape[0] != len(self.channel_names):
            raise DimMismatchError(
                f"{data.shape[0]} channels but {len(self.channel_names)} channel names"
            )
        in_range = data.min(initial=0.0) >= 0.0 and data.max(initial=0.0) <= 1.0
        if not np.all(np.isfinite(data)) or not in_range:
            raise ValueError("heatmap values must be finite and within [0, 1]")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))

    @property
    def channels(self) -> int:
        return int(self.data.shape[0])

    @property
    def height(self) -> int:
        return int(self.data.shape[1])

    @property
    def width(self) -> int:
        return int(self.data.shape[2])

    @property
    def has_composite(self) -> bool:
        return bool(self.channel_names) and self.channel_names[-1] == COMPOSITE

    def channel(self, name: str) -> FloatArray:
        return self.data[self.channel_names.index(name)]

    def parts_only(self) -> "Heatmap":
        if not self.has_composite:
            return self
        return Heatmap(self.data[:-1], self.channel_names[:-1])


def covariance_matrices(pose: PoseEstimate, part_ids: list[int]) -> FloatArray:
    return np.array(
        [[[sxx, sxy], [sxy, syy]] for sxx, sxy, syy in (pose.covariances[i] for i in part_ids)],
        dtype=np.float64,
    ).reshape(len(part_ids), 2, 2)


def precision_matrices(cov: FloatArray, names: list[str] | None = None) -> FloatArray:
    """Invert (P, 2, 2) covariances, rejecting ill-conditioned ones.

    Raises:
        DegeneratePartError: If a covariance is not positive definite or its
            condition number exceeds MAX_CONDITION.
    """
    sxx, sxy, syy = cov[:, 0, 0], cov[:, 0, 1], cov[:, 1, 1]
    det = sxx * syy - sxy * sxy
    half_trace = 0.5 * (sxx + syy)
    root = np.sqrt(np.maximum(half_trace**2 - det, 0.0))
    lo, hi = half_trace - root, half_trace + root
    bad = ~np.isfinite(det) | (lo <= 0.0) | (hi > MAX_CONDITION * np.maximum(lo, 1e-300))
    if np.any(bad):
        index = int(np.argmax(bad))
        label = names[index] if names else str(index)
        raise DegeneratePartError(
            f"part '{label}' covariance is degenerate "
            f"(eigenvalues {lo[index]:.3e}, {hi[index]:.3e})"
        )
    prec = np.empty_like(cov)
    prec[:, 0, 0] = syy / det
    prec[:, 1, 1] = sxx / det
    prec[:, 0, 1] = prec[:, 1, 0] = -sxy / det
    return prec


def gaussian_stack(
    means: FloatArray, precision: FloatArray, width: int, height: int
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Evaluate P Gaussians on the full pixel grid.

    Returns:
        (values (P, H, W), dx (P, 1, W), dy (P, H, 1)) where d = q - mu.
    """
    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    dx = xs[None, None, :] - means[:, 0, None, None]
    dy = ys[None, :, None] - means[:, 1, None, None]
    a = precision[:, 0, 0, None, None]
    b = precision[:, 0, 1, None, None]
    c = precision[:, 1, 1, None, None]
    quad = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy
    return np.exp(-0.5 * quad), dx, dy


def _windowed_stack(
    means: FloatArray, cov: FloatArray, precision: FloatArray, width: int, height: int
) -> FloatArray:
    radius = float(np.sqrt(2.0 * np.log(1.0 / WINDOW_TOLERANCE)))
    out = np.zeros((len(means), height, width))
    for p in range(len(means)):
        hx = radius * np.sqrt(cov[p, 0, 0])
        hy = radius * np.sqrt(cov[p, 1, 1])
        x0 = max(int(np.floor(means[p, 0] - hx)), 0)
        x1 = min(int(np.ceil(means[p, 0] + hx)) + 1, width)
        y0 = max(int(np.floor(means[p, 1] - hy)), 0)
        y1 = min(int(np.ceil(means[p, 1] + hy)) + 1, height)
        if x0 >= x1 or y0 >= y1:
            continue
        dx = np.arange(x0, x1, dtype=np.float64)[None, :] - means[p, 0]
        dy = np.arange(y0, y1, dtype=np.float64)[:, None] - means[p, 1]
        a, b, c = precision[p, 0, 0], precision[p, 0, 1], precision[p, 1, 1]
        out[p, y0:y1, x0:x1] = np.exp(-0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy))
    return out


def render(
    source: PoseEstimate | TemplateSpec,
    canvas: Canvas | None = None,
    composite: bool = True,
    windowed: bool = False,
) -> Heatmap:
    """Render one channel per part, plus an optional per-pixel-max composite.

    Args:
        source: A pose, or a template rendered untransformed
        canvas: Output size; defaults to the source's canvas
        composite: Append the composite channel
        windowed: Only evaluate each Gaussian where it exceeds WINDOW_TOLERANCE

    Raises:
        DegeneratePartError: If a part covariance is singular beyond tolerance.
    """
    if isinstance(source, TemplateSpec):
        template = source if canvas is None else source.with_canvas(canvas.width, canvas.height)
        pose = identity_pose(template)
    else:
        pose = source
    canvas = canvas or pose.canvas
    part_ids = list(pose.part_anchors)
    names = [pose.part_names[i] for i in part_ids]
    means = np.array(
        [
            [0.5 * (h.x + t.x), 0.5 * (h.y + t.y)]
            for h, t in (pose.part_anchors[i] for i in part_ids)
        ]
    )
    cov = covariance_matrices(pose, part_ids)
    precision = precision_matrices(cov, names)
    if windowed:
        values = _windowed_stack(means, cov, precision, canvas.width, canvas.height)
    else:
        values, _, _ = gaussian_stack(means, precision, canvas.width, canvas.height)
    if composite:
        values = np.concatenate([values, values.max(axis=0, keepdims=True)])
        names.append(COMPOSITE)
    return Heatmap(values, tuple(names))
