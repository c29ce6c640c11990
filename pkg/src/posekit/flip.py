"""Mirroring across the vertical axis for templates, annotations, poses and heatmaps.

Every flip swaps left_/right_ names through body.swap_side and keeps part ids,
so a flipped render lines up channel-for-channel with the flipped heatmap.
"""

import numpy as np

from .annotations import FrameAnnotation
from .body import swap_side
from .coarse2fine import PartMapping
from .geometry import Point2
from .rendering import Heatmap
from .template import PartSpec, PoseEstimate, TemplateSpec


def _mirror(p: Point2) -> Point2:
    return Point2(-p.x, p.y)


def flip_mapping(mapping: PartMapping) -> PartMapping:
    return PartMapping(
        coarse={i: tuple(swap_side(n) for n in names) for i, names in mapping.coarse.items()},
        fine={i: swap_side(n) for i, n in mapping.fine.items()},
    )


def flip_template(t: TemplateSpec) -> TemplateSpec:
    """Negate template x and swap left/right part names and keypoints."""
    parts = tuple(
        PartSpec(
            id=p.id,
            name=swap_side(p.name),
            head=_mirror(p.head),
            tail=_mirror(p.tail),
            sigma_along=p.sigma_along,
            sigma_across=p.sigma_across,
        )
        for p in t.parts
    )
    keypoint_map = {swap_side(k): v for k, v in t.keypoint_map.items()}
    return t.model_copy(
        update={
            "parts": parts,
            "keypoint_map": keypoint_map,
            "mapping": flip_mapping(t.mapping) if t.mapping is not None else None,
        }
    )


def flip_annotation(a: FrameAnnotation) -> FrameAnnotation:
    """Mirror x -> (W - 1) - x, swap sided keypoint names, toggle the flipped flag."""
    right_edge = a.width - 1
    return FrameAnnotation(
        frame_id=a.frame_id,
        subject_id=a.subject_id,
        image_size=a.image_size,
        keypoints={swap_side(k): Point2(right_edge - p.x, p.y) for k, p in a.keypoints.items()},
        flipped=not a.flipped,
    )


def flip_pose(pose: PoseEstimate, width: int | None = None) -> PoseEstimate:
    """Mirror a pixel-space pose within a frame of the given width."""
    right_edge = (width if width is not None else pose.canvas.width) - 1

    def mirror(p: Point2) -> Point2:
        return Point2(right_edge - p.x, p.y)

    return PoseEstimate(
        canvas=pose.canvas,
        part_names={i: swap_side(n) for i, n in pose.part_names.items()},
        part_anchors={i: (mirror(h), mirror(t)) for i, (h, t) in pose.part_anchors.items()},
        covariances={i: (sxx, -sxy, syy) for i, (sxx, sxy, syy) in pose.covariances.items()},
        keypoints={swap_side(k): mirror(p) for k, p in pose.keypoints.items()},
    )


def flip_heatmap(heatmap: Heatmap) -> Heatmap:
    """Reverse columns and swap sided channel names; channel order is kept."""
    return Heatmap(
        np.ascontiguousarray(heatmap.data[:, :, ::-1]),
        tuple(swap_side(n) for n in heatmap.channel_names),
    )
