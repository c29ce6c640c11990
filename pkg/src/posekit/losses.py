"""Reconstruction, anchor and boundary losses with analytic gradients.

total = recon + lambda1 * anchor + lambda2 * boundary, where
recon = mse (optional) + L1 distance between extracted features.

Gradients are chained by hand: pixel grid -> Gaussian mean and precision ->
pixel-space part matrices -> effective template matrices -> transform
matrices -> parameter vector.
"""

import logging
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .coarse2fine import (
    TransformSet,
    default_mapping,
    effective_matrices,
    effective_plan,
    effective_pullback,
)
from .errors import DimMismatchError, NonFiniteLossError, SchemaError
from .geometry import FloatArray, template_to_pixel
from .rendering import Heatmap, gaussian_stack, precision_matrices
from .template import Canvas, PoseEstimate, TemplateSpec, part_arrays, pixel_matrices

logger = logging.getLogger(__name__)


class LossWeights(BaseModel):
    """Weights of the anchor (lambda1) and boundary (lambda2) terms."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    lambda1: float = Field(default=0.5, ge=0.0)
    lambda2: float = Field(default=1.0, ge=0.0)


class LossReport(BaseModel):
    """Loss breakdown for one evaluation; recon == mse + perceptual."""

    model_config = ConfigDict(frozen=True)

    recon: float
    anchor: float
    boundary: float
    total: float
    mse: float = 0.0
    perceptual: float = 0.0


class FeatureExtractor(Protocol):
    """Maps a (C, H, W) grid to a flat feature vector, with its adjoint."""

    name: str

    def extract(self, data: FloatArray) -> FloatArray: ...

    def pullback(self, grad: FloatArray, shape: tuple[int, ...]) -> FloatArray: ...


class IdentityExtractor:
    """Raw pixels as features."""

    name = "identity"

    def extract(self, data: FloatArray) -> FloatArray:
        return np.asarray(data, dtype=np.float64).reshape(-1)

    def pullback(self, grad: FloatArray, shape: tuple[int, ...]) -> FloatArray:
        return np.asarray(grad).reshape(shape)


def avg_pool2(data: FloatArray) -> FloatArray:
    """2x2 average pooling over the last two axes; an odd trailing row/column is dropped."""
    h, w = data.shape[-2] // 2 * 2, data.shape[-1] // 2 * 2
    d = data[..., :h, :w]
    return 0.25 * (
        d[..., 0::2, 0::2] + d[..., 1::2, 0::2] + d[..., 0::2, 1::2] + d[..., 1::2, 1::2]
    )


def _unpool2(grad: FloatArray, shape: tuple[int, ...]) -> FloatArray:
    out = np.zeros(shape)
    h, w = grad.shape[-2] * 2, grad.shape[-1] * 2
    quarter = 0.25 * grad
    for dy in (0, 1):
        for dx in (0, 1):
            out[..., dy:h:2, dx:w:2] = quarter
    return out


class PyramidExtractor:
    """Concatenated pixels of a 3-level 2x average-pooling pyramid."""

    name = "pyramid"

    def __init__(self, levels: int = 3) -> None:
        self.levels = levels

    def _pyramid(self, data: FloatArray) -> list[FloatArray]:
        levels = [np.asarray(data, dtype=np.float64)]
        for _ in range(self.levels - 1):
            levels.append(avg_pool2(levels[-1]))
        return levels

    def extract(self, data: FloatArray) -> FloatArray:
        return np.concatenate([level.reshape(-1) for level in self._pyramid(data)])

    def pullback(self, grad: FloatArray, shape: tuple[int, ...]) -> FloatArray:
        shapes = [level.shape for level in self._pyramid(np.zeros(shape))]
        sizes = [int(np.prod(s)) for s in shapes]
        pieces = np.split(np.asarray(grad), np.cumsum(sizes)[:-1])
        acc = pieces[-1].reshape(shapes[-1])
        for k in range(self.levels - 2, -1, -1):
            acc = pieces[k].reshape(shapes[k]) + _unpool2(acc, shapes[k])
        return acc


EXTRACTORS = {"identity": IdentityExtractor, "pyramid": PyramidExtractor}


def make_extractor(name: str) -> FeatureExtractor:
    try:
        return EXTRACTORS[name]()  # type: ignore[no-any-return]
    except KeyError:
        raise SchemaError(
            f"unknown feature extractor '{name}', expected one of {sorted(EXTRACTORS)}"
        ) from None


def _check_dims(a: Heatmap, b: Heatmap) -> None:
    if a.data.shape != b.data.shape:
        raise DimMismatchError(f"heatmap shapes differ: {a.data.shape} vs {b.data.shape}")


def mse_loss(a: Heatmap, b: Heatmap) -> float:
    """Mean squared difference over all pixels and channels."""
    _check_dims(a, b)
    return float(np.mean((a.data - b.data) ** 2))


def perceptual_l1(a: Heatmap, b: Heatmap, f: FeatureExtractor) -> float:
    """Plain L1 distance between extracted features."""
    _check_dims(a, b)
    return float(np.sum(np.abs(f.extract(a.data) - f.extract(b.data))))


def _anchor_arrays(pose: PoseEstimate, t: TemplateSpec) -> tuple[FloatArray, FloatArray]:
    heads = np.array([pose.part_anchors[p.id][0] for p in t.parts], dtype=np.float64)
    tails = np.array([pose.part_anchors[p.id][1] for p in t.parts], dtype=np.float64)
    return heads, tails


def _anchor_terms(
    heads: FloatArray, tails: FloatArray, t: TemplateSpec, diagonal: float
) -> tuple[float, FloatArray, FloatArray]:
    """Anchor loss and its gradients w.r.t. pixel heads and tails (P, 2)."""
    grad_h = np.zeros_like(heads)
    grad_t = np.zeros_like(tails)
    if not t.adjacency:
        return 0.0, grad_h, grad_t
    scale = 1.0 / (len(t.adjacency) * diagonal**2)
    total = 0.0
    for i, end_i, j, end_j in t.adjacency:
        pi, pj = t.part_index(i), t.part_index(j)
        a = heads[pi] if end_i == "head" else tails[pi]
        b = heads[pj] if end_j == "head" else tails[pj]
        diff = a - b
        total += float(diff @ diff)
        (grad_h if end_i == "head" else grad_t)[pi] += 2.0 * scale * diff
        (grad_h if end_j == "head" else grad_t)[pj] -= 2.0 * scale * diff
    return total * scale, grad_h, grad_t


def _boundary_terms(points: FloatArray, canvas: Canvas) -> tuple[float, FloatArray]:
    """Squared-hinge boundary loss over (N, 2) pixel points and its gradient."""
    limits = np.array([canvas.width - 1, canvas.height - 1], dtype=np.float64)
    below = np.maximum(0.0, -points)
    above = np.maximum(0.0, points - limits)
    violation = below + above
    scale = 1.0 / (len(points) * canvas.diagonal**2)
    loss = float(np.sum(violation**2)) * scale
    grad = 2.0 * scale * violation * (np.sign(above) - np.sign(below))
    return loss, grad


def _max_excursion(points: FloatArray, canvas: Canvas) -> float:
    limits = np.array([canvas.width - 1, canvas.height - 1], dtype=np.float64)
    return float(np.max(np.maximum(0.0, np.maximum(-points, points - limits)), initial=0.0))


def anchor_loss(pose: PoseEstimate, t: TemplateSpec) -> float:
    """Mean squared pixel gap over adjacency pairs, divided by the canvas diagonal squared."""
    heads, tails = _anchor_arrays(pose, t)
    loss, _, _ = _anchor_terms(heads, tails, t, pose.canvas.diagonal)
    return loss


def boundary_loss(pose: PoseEstimate, canvas: Canvas) -> float:
    """Mean squared out-of-frame distance over every part anchor, divided by diagonal squared."""
    points = np.array(
        [pt for anchors in pose.part_anchors.values() for pt in anchors], dtype=np.float64
    )
    loss, _ = _boundary_terms(points, canvas)
    return loss


@dataclass(frozen=True)
class Evaluation:
    report: LossReport
    gradient: FloatArray | None
    rendered: FloatArray
    excursion: float = 0.0  # largest out-of-frame anchor distance, pixels


def _target_parts(target: Heatmap, t: TemplateSpec) -> FloatArray:
    parts = target.parts_only()
    expected = (len(t.parts), t.canvas.height, t.canvas.width)
    if parts.data.shape != expected:
        raise DimMismatchError(
            f"target shape {parts.data.shape} does not match template {expected}"
        )
    return parts.data


def evaluate(
    target: Heatmap,
    ts: TransformSet,
    t: TemplateSpec,
    w: LossWeights,
    f: FeatureExtractor,
    use_mse: bool = True,
    with_gradient: bool = True,
) -> Evaluation:
    """Compute the loss report and, optionally, its gradient over the parameter vector.

    Raises:
        DimMismatchError: If the target does not match the template canvas.
        DegeneratePartError: If a transformed part covariance is degenerate.
        NonFiniteLossError: If the total is NaN or infinite.
    """
    y = _target_parts(target, t)
    width, height = t.canvas.width, t.canvas.height
    plan = effective_plan(ts.mode, t.mapping or default_mapping(), t)
    eff = effective_matrices(ts, plan)
    px = pixel_matrices(t, eff)
    lin, off = px[:, :2, :2], px[:, :2, 2]

    heads0, tails0, cov0 = part_arrays(t)
    mid0 = 0.5 * (heads0 + tails0)
    heads_px = np.einsum("pij,pj->pi", lin, heads0) + off
    tails_px = np.einsum("pij,pj->pi", lin, tails0) + off
    # same arithmetic as render() on a PoseEstimate, so targets rendered from a pose match exactly
    means = 0.5 * (heads_px + tails_px)
    cov = lin @ cov0 @ lin.transpose(0, 2, 1)
    precision = precision_matrices(cov, [p.name for p in t.parts])
    g, dx, dy = gaussian_stack(means, precision, width, height)

    residual = g - y
    mse = float(np.mean(residual**2)) if use_mse else 0.0
    feature_diff = f.extract(g) - f.extract(y)
    perceptual = float(np.sum(np.abs(feature_diff)))
    recon = mse + perceptual

    anchor, grad_h, grad_t = _anchor_terms(heads_px, tails_px, t, t.canvas.diagonal)
    anchors_px = np.concatenate([heads_px, tails_px])
    boundary, grad_b = _boundary_terms(anchors_px, t.canvas)
    excursion = _max_excursion(anchors_px, t.canvas)
    total = recon + w.lambda1 * anchor + w.lambda2 * boundary
    if not np.isfinite(total):
        raise NonFiniteLossError(
            f"loss is not finite (recon={recon}, anchor={anchor}, boundary={boundary})"
        )
    report = LossReport(
        recon=recon, anchor=anchor, boundary=boundary, total=total, mse=mse, perceptual=perceptual
    )
    if not with_gradient:
        return Evaluation(report, None, g, excursion)

    # dL/dg, then weighted by g for the Gaussian chain rule
    dg = f.pullback(np.sign(feature_diff), g.shape)
    if use_mse:
        dg = dg + 2.0 * residual / residual.size
    r = dg * g
    s_x = np.sum(r * dx, axis=(1, 2))
    s_y = np.sum(r * dy, axis=(1, 2))
    s_xx = np.sum(r * dx * dx, axis=(1, 2))
    s_xy = np.sum(r * dx * dy, axis=(1, 2))
    s_yy = np.sum(r * dy * dy, axis=(1, 2))
    grad_mean = np.einsum("pij,pj->pi", precision, np.stack([s_x, s_y], axis=1))
    grad_prec = -0.5 * np.stack([np.stack([s_xx, s_xy], 1), np.stack([s_xy, s_yy], 1)], axis=1)
    grad_cov = -precision @ grad_prec @ precision

    grad_px = np.zeros((len(t.parts), 2, 3))
    grad_px[:, :, :2] = 2.0 * grad_cov @ lin @ cov0
    grad_px[:, :, :2] += np.einsum("pi,pj->pij", grad_mean, mid0)
    grad_px[:, :, 2] = grad_mean

    n = len(t.parts)
    grad_h = grad_h * w.lambda1 + w.lambda2 * grad_b[:n]
    grad_t = grad_t * w.lambda1 + w.lambda2 * grad_b[n:]
    grad_px[:, :, :2] += np.einsum("pi,pj->pij", grad_h, heads0)
    grad_px[:, :, :2] += np.einsum("pi,pj->pij", grad_t, tails0)
    grad_px[:, :, 2] += grad_h + grad_t

    to_px_lin = template_to_pixel(width, height).linear
    grad_eff = np.einsum("ki,pkj->pij", to_px_lin, grad_px)
    gradient = ts.pullback(effective_pullback(ts, plan, grad_eff))
    return Evaluation(report, gradient, g, excursion)


def total_loss(
    target: Heatmap,
    ts: TransformSet,
    t: TemplateSpec,
    w: LossWeights,
    f: FeatureExtractor,
    use_mse: bool = True,
) -> LossReport:
    """Loss report of the rendered effective pose against the target's part channels."""
    return evaluate(target, ts, t, w, f, use_mse, with_gradient=False).report


def loss_gradient(
    target: Heatmap,
    ts: TransformSet,
    t: TemplateSpec,
    w: LossWeights,
    f: FeatureExtractor,
    use_mse: bool = True,
) -> FloatArray:
    """Analytic gradient of the total loss; length == ts.n_parameters."""
    gradient = evaluate(target, ts, t, w, f, use_mse).gradient
    assert gradient is not None
    return gradient
