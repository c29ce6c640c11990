"""Seeded synthetic pose sequences for end-to-end checks of fitting and metrics.

A subject is the template with per-part length factors. Each frame draws
smooth per-part rotations; translations follow by forward kinematics over the
adjacency graph, so linked anchors coincide exactly and the anchor loss of
ground truth is zero. One frame scale (phi, beta) is shared by the sequence.
"""

import logging
import math
from collections import deque

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .annotations import FrameAnnotation, annotation_from_pose
from .body import PART_NAMES
from .coarse2fine import Parameterization, TransformMode, TransformSet
from .geometry import ConstrainedTransformParams, FloatArray, FrameScale, Point2, build_constrained
from .rendering import Heatmap, render
from .template import PartSpec, TemplateSpec, transform_template

logger = logging.getLogger(__name__)

ROOT_PART = 1
SCALE_JITTER = 0.1


class SyntheticSequenceSpec(BaseModel):
    """Parameters of one synthetic single-subject sequence."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    n_frames: int = Field(default=10, ge=1)
    subject_bplp_profile: dict[str, float] = Field(default_factory=dict)
    motion_amplitude: float = Field(default=0.3, ge=0.0)  # radians of per-part swing
    noise_sigma: float = Field(default=0.0, ge=0.0)
    seed: int = 0
    subject_id: str = "s01"
    frame_scale: tuple[float, float] | None = None  # sampled near 1 when None

    @field_validator("subject_bplp_profile")
    @classmethod
    def _known_parts(cls, v: dict[str, float]) -> dict[str, float]:
        unknown = sorted(set(v) - set(PART_NAMES))
        if unknown:
            raise ValueError(f"profile names unknown parts: {unknown}")
        if any(f <= 0.0 for f in v.values()):
            raise ValueError("profile length factors must be positive")
        return v


class SyntheticFrame(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    target: Heatmap
    transforms: TransformSet
    annotation: FrameAnnotation


class SyntheticSequence(BaseModel):
    model_config = ConfigDict(frozen=True)

    template: TemplateSpec  # the subject template the frames were generated from
    frames: list[SyntheticFrame]


def _endpoint(part: PartSpec, end: str) -> FloatArray:
    p = part.head if end == "head" else part.tail
    return np.array([p.x, p.y])


def _tree_edges(t: TemplateSpec) -> list[tuple[int, str, int, str]]:
    """Adjacency edges oriented parent -> child in breadth-first order from the core."""
    neighbours: dict[int, list[tuple[str, int, str]]] = {p.id: [] for p in t.parts}
    for i, end_i, j, end_j in t.adjacency:
        neighbours[i].append((end_i, j, end_j))
        neighbours[j].append((end_j, i, end_i))
    seen = {ROOT_PART}
    queue = deque([ROOT_PART])
    edges = []
    while queue:
        parent = queue.popleft()
        for end_p, child, end_c in neighbours[parent]:
            if child in seen:
                continue
            seen.add(child)
            edges.append((parent, end_p, child, end_c))
            queue.append(child)
    return edges


def subject_template(t: TemplateSpec, profile: dict[str, float]) -> TemplateSpec:
    """Scale part lengths by profile factors, moving linked descendants along."""
    if not profile:
        return t
    heads = {p.id: _endpoint(p, "head") for p in t.parts}
    tails = {p.id: _endpoint(p, "tail") for p in t.parts}
    root = t.part(ROOT_PART)
    factor = profile.get(root.name, 1.0)
    tails[ROOT_PART] = heads[ROOT_PART] + factor * (tails[ROOT_PART] - heads[ROOT_PART])
    placed = {ROOT_PART}
    for parent, end_p, child, end_c in _tree_edges(t):
        part = t.part(child)
        original_attach = _endpoint(part, end_c)
        other_end = "tail" if end_c == "head" else "head"
        attach = heads[parent] if end_p == "head" else tails[parent]
        free = attach + profile.get(part.name, 1.0) * (_endpoint(part, other_end) - original_attach)
        (heads if end_c == "head" else tails)[child] = attach
        (heads if other_end == "head" else tails)[child] = free
        placed.add(child)
    for part in t.parts:
        if part.id not in placed:
            factor = profile.get(part.name, 1.0)
            heads[part.id] = tails[part.id] + factor * (heads[part.id] - tails[part.id])
    parts = tuple(
        p.model_copy(
            update={
                "head": Point2(float(heads[p.id][0]), float(heads[p.id][1])),
                "tail": Point2(float(tails[p.id][0]), float(tails[p.id][1])),
            }
        )
        for p in t.parts
    )
    return t.model_copy(update={"name": f"{t.name}-subject", "parts": parts})


def kinematic_transforms(
    t: TemplateSpec, angles: dict[int, float], root_offset: tuple[float, float], scale: FrameScale
) -> TransformSet:
    """Baseline18 constrained transforms with linked anchors kept coincident.

    Each child with rotation theta and attach point c meets its parent's
    transformed point Q when its localization is R(theta)^T Q - S c.
    """
    params: dict[int, ConstrainedTransformParams] = {
        ROOT_PART: ConstrainedTransformParams(angles[ROOT_PART], *root_offset)
    }
    matrices = {ROOT_PART: build_constrained(params[ROOT_PART], scale).m}
    s = np.array([scale.phi, scale.beta])

    def attach(child: int, attach_local: FloatArray, target: FloatArray) -> None:
        theta = angles[child]
        cos, sin = math.cos(theta), math.sin(theta)
        rot_t = np.array([[cos, -sin], [sin, cos]])
        offset = rot_t @ target - s * attach_local
        params[child] = ConstrainedTransformParams(theta, float(offset[0]), float(offset[1]))
        matrices[child] = build_constrained(params[child], scale).m

    for parent, end_p, child, end_c in _tree_edges(t):
        q = _endpoint(t.part(parent), end_p)
        target = matrices[parent][:2, :2] @ q + matrices[parent][:2, 2]
        attach(child, _endpoint(t.part(child), end_c), target)
    root = matrices[ROOT_PART]
    for part in t.parts:
        if part.id not in params:
            c = _endpoint(part, "tail")
            attach(part.id, c, root[:2, :2] @ c + root[:2, 2])
    return TransformSet(
        TransformMode.BASELINE18,
        Parameterization.CONSTRAINED,
        limb_params=tuple(params[p.id] for p in t.parts),
        scale=scale,
    )


def generate_synthetic_sequence(spec: SyntheticSequenceSpec, t: TemplateSpec) -> SyntheticSequence:
    """Render a deterministic sequence of targets with ground-truth transforms and keypoints."""
    rng = np.random.default_rng(spec.seed)
    subject = subject_template(t, spec.subject_bplp_profile)
    if spec.frame_scale is not None:
        scale = FrameScale(*spec.frame_scale)
    else:
        phi, beta = rng.uniform(1.0 - SCALE_JITTER, 1.0 + SCALE_JITTER, size=2)
        scale = FrameScale(float(phi), float(beta))
    n_parts = len(subject.parts)
    swing = rng.uniform(-1.0, 1.0, size=n_parts)
    phase = rng.uniform(0.0, 2.0 * math.pi, size=n_parts)
    drift = rng.uniform(-1.0, 1.0, size=2)
    frequency = 2.0 * math.pi / max(spec.n_frames, 2)

    frames = []
    for k in range(spec.n_frames):
        wave = np.sin(frequency * k + phase)
        angles = {
            p.id: float(
                spec.motion_amplitude * swing[i] * wave[i] * (0.25 if p.id == ROOT_PART else 1.0)
            )
            for i, p in enumerate(subject.parts)
        }
        offset = 0.1 * spec.motion_amplitude * drift * math.sin(frequency * k)
        ts = kinematic_transforms(subject, angles, (float(offset[0]), float(offset[1])), scale)
        matrices = dict(zip([p.id for p in subject.parts], ts.matrices(), strict=True))
        pose = transform_template(subject, matrices)
        target = render(pose, composite=False)
        if spec.noise_sigma > 0.0:
            noisy = target.data + rng.normal(0.0, spec.noise_sigma, size=target.data.shape)
            target = Heatmap(np.clip(noisy, 0.0, 1.0), target.channel_names)
        frame_id = f"{spec.subject_id}_{k:04d}"
        annotation = annotation_from_pose(pose, frame_id, spec.subject_id)
        frames.append(SyntheticFrame(target=target, transforms=ts, annotation=annotation))
    logger.debug(f"Generated {len(frames)} synthetic frames for subject '{spec.subject_id}'")
    return SyntheticSequence(template=subject, frames=frames)
