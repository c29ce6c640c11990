"""Keypoint evaluation: PDJ, per-joint and per-region accuracy, normalized L2, BPLP and BPLP-C.

Predictions may be PoseEstimate or FrameAnnotation objects. Accuracy reads only
keypoints; BPLP reads part anchors when a PoseEstimate carries them. Left and
right are taken as labeled, with no side-swap correction.
"""

import logging
from collections.abc import Mapping, Sequence
from typing import Protocol

import numpy as np
from pydantic import BaseModel, ConfigDict

from .annotations import FrameAnnotation
from .body import KEYPOINT_NAMES, LIMBS, REGIONS, SIDED_JOINTS, TORSO
from .errors import DegenerateBoxError, DegenerateTorsoError, LengthMismatchError
from .geometry import FloatArray, Point2
from .template import PoseEstimate

logger = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-6
TORSO_TOLERANCE = 1e-9
TORSO_PART = "core"
OUTLIER_SIGMAS = 3.0


class HasKeypoints(Protocol):
    @property
    def keypoints(self) -> Mapping[str, Point2]: ...


class MetricsReport(BaseModel):
    """Detection accuracy and normalized L2 over a set of frames."""

    model_config = ConfigDict(frozen=True)

    pdj: float
    per_joint: dict[str, float]
    l2: float
    n_frames: int
    threshold: float = 0.05
    regions: dict[str, float] = {}
    side_gap: dict[str, float] = {}  # percentage points, |acc(left) - acc(right)|
    l2_per_frame: list[float] = []
    outliers: int = 0


class BplpReport(BaseModel):
    """Cross-frame spread of body part length proportions."""

    model_config = ConfigDict(frozen=True)

    per_limb_std: dict[str, float]
    bplp_c: float
    left_right_gap: dict[str, float] = {}
    n_frames: int = 0


def _keypoint_array(k: HasKeypoints) -> FloatArray:
    return np.array([k.keypoints[name] for name in KEYPOINT_NAMES], dtype=np.float64)


def _check_aligned(gt: Sequence[object], pred: Sequence[object]) -> None:
    if len(gt) != len(pred):
        raise LengthMismatchError(f"{len(gt)} ground-truth frames but {len(pred)} predictions")
    if not gt:
        raise LengthMismatchError("no frames to evaluate")


def person_diagonal(gt: FrameAnnotation) -> float:
    """Diagonal of the axis-aligned bounding box of the ground-truth keypoints.

    Raises:
        DegenerateBoxError: If every keypoint coincides.
    """
    pts = _keypoint_array(gt)
    span = pts.max(axis=0) - pts.min(axis=0)
    diagonal = float(np.hypot(span[0], span[1]))
    if diagonal == 0.0:
        raise DegenerateBoxError(f"frame '{gt.frame_id}': all keypoints coincide")
    return diagonal


def _distances(gt: Sequence[FrameAnnotation], pred: Sequence[HasKeypoints]) -> FloatArray:
    """(frames, joints) Euclidean distances."""
    diffs = np.stack(
        [_keypoint_array(p) - _keypoint_array(g) for g, p in zip(gt, pred, strict=True)]
    )
    return np.hypot(diffs[..., 0], diffs[..., 1])


def _l2_per_frame(gt: Sequence[FrameAnnotation], dist: FloatArray) -> FloatArray:
    widths = np.array([g.width for g in gt], dtype=np.float64)
    if any(g.width != g.height for g in gt):
        logger.warning("L2 error normalizes by frame width but some frames are not square")
    return dist.mean(axis=1) / widths * 100.0


def l2_error(gt: Sequence[FrameAnnotation], pred: Sequence[HasKeypoints]) -> float:
    """Mean keypoint distance over joints and frames as a percent of frame width."""
    _check_aligned(gt, pred)
    return float(np.mean(_l2_per_frame(gt, _distances(gt, pred))))


def pdj(
    gt: Sequence[FrameAnnotation], pred: Sequence[HasKeypoints], threshold: float = 0.05
) -> MetricsReport:
    """Percentage of detected joints plus per-joint, per-region and L2 breakdowns.

    A joint is detected when its distance to ground truth is at most
    threshold * person_diagonal of the ground-truth frame.

    Raises:
        LengthMismatchError: If the lists are empty or differ in length.
        DegenerateBoxError: If a ground-truth frame has coincident keypoints.
    """
    _check_aligned(gt, pred)
    dist = _distances(gt, pred)
    limits = np.array([threshold * person_diagonal(g) for g in gt])
    hits = (dist <= limits[:, None]).astype(np.float64)

    per_joint_arr = hits.mean(axis=0)
    per_joint = {name: float(v) for name, v in zip(KEYPOINT_NAMES, per_joint_arr, strict=True)}
    regions = {
        region: float(hits[:, [KEYPOINT_NAMES.index(n) for n in names]].mean())
        for region, names in REGIONS.items()
    }
    side_gap = {
        joint: abs(per_joint[f"left_{joint}"] - per_joint[f"right_{joint}"]) * 100.0
        for joint in SIDED_JOINTS
    }
    per_frame = _l2_per_frame(gt, dist)
    outlier_limit = per_frame.mean() + OUTLIER_SIGMAS * per_frame.std()
    return MetricsReport(
        pdj=float(hits.mean(axis=1).mean()),
        per_joint=per_joint,
        l2=float(per_frame.mean()),
        n_frames=len(gt),
        threshold=threshold,
        regions=regions,
        side_gap=side_gap,
        l2_per_frame=[float(v) for v in per_frame],
        outliers=int(np.sum(per_frame > outlier_limit)),
    )


def _length(k: HasKeypoints, a: str, b: str) -> float:
    pa, pb = k.keypoints[a], k.keypoints[b]
    return float(np.hypot(pa.x - pb.x, pa.y - pb.y))


def _part_lengths(pose: PoseEstimate) -> dict[str, float]:
    lengths = {}
    for part_id, name in pose.part_names.items():
        head, tail = pose.part_anchors[part_id]
        lengths[name] = float(np.hypot(head.x - tail.x, head.y - tail.y))
    return lengths


def bplp(pred: HasKeypoints, limbs: Mapping[str, tuple[str, str]] = LIMBS) -> dict[str, float]:
    """Each limb's predicted length divided by the predicted torso length.

    For a PoseEstimate whose parts cover every limb, lengths are the head-to-tail
    anchor distances of the limb parts and of the core part. Otherwise they are
    keypoint distances, with the torso running from neck to abdomen.

    Raises:
        DegenerateTorsoError: If the torso is shorter than TORSO_TOLERANCE.
    """
    if isinstance(pred, PoseEstimate):
        parts = _part_lengths(pred)
        if TORSO_PART in parts and all(limb in parts for limb in limbs):
            torso = parts[TORSO_PART]
            if torso < TORSO_TOLERANCE:
                raise DegenerateTorsoError(f"torso length {torso:.3e} px is below tolerance")
            return {limb: parts[limb] / torso for limb in limbs}
    torso = _length(pred, *TORSO)
    if torso < TORSO_TOLERANCE:
        raise DegenerateTorsoError(f"torso length {torso:.3e} px is below tolerance")
    return {limb: _length(pred, a, b) / torso for limb, (a, b) in limbs.items()}


def bplp_consistency(
    preds: Sequence[HasKeypoints], limbs: Mapping[str, tuple[str, str]] = LIMBS
) -> BplpReport:
    """Population std of each limb's BPLP across frames and its reciprocal mean.

    Each std is floored at SIGMA_FLOOR, so a perfectly rigid sequence reports
    bplp_c == 1 / SIGMA_FLOOR.
    """
    if len(preds) < 2:
        raise LengthMismatchError(f"BPLP consistency needs at least 2 frames, got {len(preds)}")
    table = [bplp(p, limbs) for p in preds]
    per_limb_std = {limb: float(np.std([row[limb] for row in table])) for limb in limbs}
    floored = [max(s, SIGMA_FLOOR) for s in per_limb_std.values()]
    gaps = {}
    for limb in limbs:
        if limb.startswith("left_") and "right_" + limb[len("left_") :] in limbs:
            kind = limb[len("left_") :]
            gaps[kind] = float(np.mean([abs(row[limb] - row["right_" + kind]) for row in table]))
    return BplpReport(
        per_limb_std=per_limb_std,
        bplp_c=1.0 / float(np.mean(floored)),
        left_right_gap=gaps,
        n_frames=len(preds),
    )
