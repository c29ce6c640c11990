"""Per-frame pose fitting by gradient descent with Armijo backtracking.

The line search starts at step_size, then at twice the last accepted step,
halving (by `shrink`) until the Armijo condition holds. Trial points outside
the valid parameter domain count as rejected steps, as do trial points that
carry an anchor further out of frame than the current excursion or
boundary_margin_px, whichever is larger. A step that grows the boundary term
never ends the fit as converged. The best parameters seen are returned.
"""

import logging
from collections.abc import Sequence
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict

from .annotations import annotation_from_pose
from .coarse2fine import TransformMode, TransformSet, default_mapping, effective_affines
from .config import FitConfig
from .errors import (
    DegeneratePartError,
    FlipMismatchError,
    ModeMismatchError,
    NonFiniteLossError,
    NonPositiveScaleError,
    ScaleOutOfBoundsError,
    SchemaError,
    SingularTransformError,
)
from .flip import flip_annotation, flip_heatmap, flip_pose, flip_template
from .geometry import FloatArray
from .losses import (
    Evaluation,
    FeatureExtractor,
    LossReport,
    LossWeights,
    evaluate,
    make_extractor,
    total_loss,
)
from .metrics import pdj
from .rendering import Heatmap
from .template import PoseEstimate, TemplateSpec, transform_template

logger = logging.getLogger(__name__)

# Trial points raising these are outside the parameter domain.
_INVALID_STEP = (
    SingularTransformError,
    ScaleOutOfBoundsError,
    NonPositiveScaleError,
    DegeneratePartError,
    NonFiniteLossError,
)

GRADIENT_TOL = 1e-10


class FitResult(BaseModel):
    """Outcome of fitting one frame."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    transforms: TransformSet
    pose: PoseEstimate
    loss_trace: list[LossReport]
    iterations: int
    converged: bool
    frame_id: str = ""
    flip_agreement_px: float | None = None
    flip_pdj: float | None = None

    @property
    def final(self) -> LossReport:
        return self.loss_trace[-1]

    def to_json(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "frame_id": self.frame_id,
            "iterations": self.iterations,
            "converged": self.converged,
            "parameter_count": self.transforms.n_parameters,
            "final_loss": self.final.model_dump(),
            "transforms": self.transforms.to_json(),
        }
        if self.flip_agreement_px is not None:
            data["flip_agreement_px"] = self.flip_agreement_px
        if self.flip_pdj is not None:
            data["flip_pdj"] = self.flip_pdj
        return data


def pose_of(ts: TransformSet, t: TemplateSpec) -> PoseEstimate:
    return transform_template(t, effective_affines(ts, t.mapping or default_mapping(), t))


def _try_evaluate(
    target: Heatmap,
    mode: TransformMode,
    cfg: FitConfig,
    t: TemplateSpec,
    f: FeatureExtractor,
    x: FloatArray,
) -> tuple[TransformSet, Evaluation] | None:
    try:
        ts = TransformSet.from_vector(mode, cfg.parameterization, x)
        return ts, evaluate(target, ts, t, cfg.weights, f, cfg.use_mse)
    except _INVALID_STEP as e:
        logger.debug(f"Rejected trial point: {e}")
        return None


def fit_frame(
    target: Heatmap,
    t: TemplateSpec,
    cfg: FitConfig,
    init: TransformSet | None = None,
    frame_id: str = "",
) -> FitResult:
    """Minimize the total loss over one frame's transform parameters.

    Args:
        target: Heatmap whose part channels are matched
        t: Template
        cfg: Fit configuration
        init: Starting transforms; identity for cfg's mode when omitted
        frame_id: Label used in logs and the result

    Raises:
        ModeMismatchError: If init does not match cfg's mode and parameterization.
        NonFiniteLossError: If the loss at init or a gradient is not finite.
    """
    if init is None:
        init = TransformSet.identity(cfg.mode, cfg.parameterization)
    if init.mode is not cfg.mode or init.parameterization is not cfg.parameterization:
        raise ModeMismatchError(
            f"init is {init.mode}/{init.parameterization}, "
            f"config wants {cfg.mode}/{cfg.parameterization}"
        )
    f = make_extractor(cfg.extractor)
    try:
        current = evaluate(target, init, t, cfg.weights, f, cfg.use_mse)
    except NonFiniteLossError as e:
        raise NonFiniteLossError(f"frame '{frame_id}': non-finite loss at init: {e}") from e

    x = init.to_vector()
    ts = init
    trace = [current.report]
    mask = init.fine_parameter_mask()
    frozen_until = 0
    if cfg.mode is TransformMode.COARSE2FINE20:
        frozen_until = int(cfg.fine_freeze_fraction * cfg.max_iters)
    step = cfg.step_size
    converged = False
    iterations = 0

    for it in range(cfg.max_iters):
        assert current.gradient is not None
        grad = current.gradient * mask if it < frozen_until else current.gradient
        if not np.all(np.isfinite(grad)):
            raise NonFiniteLossError(f"frame '{frame_id}': non-finite gradient at iteration {it}")
        slope = float(grad @ grad)
        if slope <= GRADIENT_TOL**2:
            if it < frozen_until:
                frozen_until = it
                continue
            converged = True
            break

        loss = current.report.total
        wall = max(current.excursion, cfg.boundary_margin_px)
        accepted = None
        for _ in range(cfg.max_backtracks):
            trial = _try_evaluate(target, cfg.mode, cfg, t, f, x - step * grad)
            if (
                trial is not None
                and trial[1].report.total <= loss - cfg.armijo_c * step * slope
                and trial[1].excursion <= wall
            ):
                accepted = trial
                break
            step *= cfg.shrink
        if accepted is None:
            logger.warning(f"frame '{frame_id}': line search exhausted at iteration {it}")
            break

        boundary_before = current.report.boundary
        ts, current = accepted
        x = ts.to_vector()
        trace.append(current.report)
        iterations = it + 1
        logger.debug(
            f"frame '{frame_id}' iter {iterations}: "
            f"total={current.report.total:.6e} step={step:.3e}"
        )
        decrease = (loss - current.report.total) / max(abs(loss), np.finfo(float).tiny)
        if decrease < cfg.tol and current.report.boundary <= boundary_before:
            if it < frozen_until:
                frozen_until = it + 1
            else:
                converged = True
                break
        step *= 2.0

    return FitResult(
        transforms=ts,
        pose=pose_of(ts, t),
        loss_trace=trace,
        iterations=iterations,
        converged=converged,
        frame_id=frame_id,
    )


def _mean_keypoint_distance(a: PoseEstimate, b: PoseEstimate) -> float:
    distances = [
        np.hypot(a.keypoints[k].x - b.keypoints[k].x, a.keypoints[k].y - b.keypoints[k].y)
        for k in a.keypoints
    ]
    return float(np.mean(distances))


def flip_equivariant_pdj(
    reference: PoseEstimate, pred: PoseEstimate, frame_id: str = "", tol: float = 1e-12
) -> float:
    """PDJ of pred against reference, checked to be unchanged when both are mirrored.

    Raises:
        FlipMismatchError: If PDJ or L2 differ by more than tol between the two frames.
    """
    ref_a = annotation_from_pose(reference, frame_id)
    pred_a = annotation_from_pose(pred, frame_id)
    direct = pdj([ref_a], [pred_a])
    mirrored = pdj([flip_annotation(ref_a)], [flip_annotation(pred_a)])
    if abs(direct.pdj - mirrored.pdj) > tol or abs(direct.l2 - mirrored.l2) > tol:
        raise FlipMismatchError(
            f"frame '{frame_id}': PDJ {direct.pdj} / L2 {direct.l2} direct, "
            f"{mirrored.pdj} / {mirrored.l2} mirrored"
        )
    return direct.pdj


def fit_sequence(
    targets: Sequence[Heatmap],
    t: TemplateSpec,
    cfg: FitConfig,
    frame_ids: Sequence[str] | None = None,
    init: TransformSet | None = None,
) -> list[FitResult]:
    """Fit frames independently, optionally warm-starting each from the previous result.

    With cfg.flip_augment, every frame is also fit mirrored against the
    mirrored template. The mirrored pose is flipped back; its mean keypoint
    distance to the direct fit is stored as flip_agreement_px, and the PDJ of
    the direct fit against it, verified equal under mirroring, as flip_pdj.

    Raises:
        SchemaError: If targets is empty.
        FlipMismatchError: If flip_pdj changes under mirroring.
    """
    if not targets:
        raise SchemaError("fit_sequence needs at least one target")
    ids = list(frame_ids) if frame_ids is not None else [f"{k:04d}" for k in range(len(targets))]
    if len(ids) != len(targets):
        raise SchemaError(f"{len(ids)} frame ids for {len(targets)} targets")
    mirrored = flip_template(t) if cfg.flip_augment else None

    results: list[FitResult] = []
    for target, frame_id in zip(targets, ids, strict=True):
        start = results[-1].transforms if cfg.warm_start and results else init
        result = fit_frame(target, t, cfg, start, frame_id)
        if mirrored is not None:
            mirror_fit = fit_frame(flip_heatmap(target), mirrored, cfg, None, f"{frame_id}/flipped")
            back = flip_pose(mirror_fit.pose, t.canvas.width)
            result.flip_agreement_px = _mean_keypoint_distance(result.pose, back)
            result.flip_pdj = flip_equivariant_pdj(back, result.pose, frame_id)
        logger.info(
            f"Frame {frame_id}: {result.iterations} iterations, total={result.final.total:.6e}, "
            f"converged={result.converged}"
        )
        results.append(result)
    return results


def finite_difference_gradient(
    target: Heatmap,
    ts: TransformSet,
    t: TemplateSpec,
    w: LossWeights,
    f: FeatureExtractor,
    h: float = 1e-4,
    use_mse: bool = True,
) -> FloatArray:
    """Central-difference gradient of total_loss over the parameter vector."""
    if not 1e-8 <= h <= 1e-2:
        raise ValueError(f"finite-difference step must lie in [1e-8, 1e-2], got {h}")

    def loss_at(x: FloatArray) -> float:
        moved = TransformSet.from_vector(ts.mode, ts.parameterization, x)
        return total_loss(target, moved, t, w, f, use_mse).total

    x0 = ts.to_vector()
    grad = np.zeros_like(x0)
    for j in range(len(x0)):
        step = np.zeros_like(x0)
        step[j] = h
        grad[j] = (loss_at(x0 + step) - loss_at(x0 - step)) / (2.0 * h)
    return grad
