"""Body-part templates: loading, validation, and transformation into poses.

A template is 18 anisotropic Gaussian parts, each defined by a head and tail
anchor plus along/across sigmas, in template units ([-1, 1]^2, y down).
"""

import json
import logging
from collections.abc import Mapping
from importlib import resources
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat
from pydantic import ValidationError as PydanticValidationError

from .body import KEYPOINT_NAMES, PART_NAMES
from .coarse2fine import PartMapping
from .errors import MissingTransformError, SchemaError, TemplateValidationError
from .geometry import AffineTransform, FloatArray, Point2, template_to_pixel

logger = logging.getLogger(__name__)

Endpoint = Literal["head", "tail"]

PRESETS = ("t_orig", "t_new")

_SCHEMA_ERROR_TYPES = {"missing", "extra_forbidden", "json_invalid", "model_type", "dict_type"}


class Canvas(BaseModel):
    """Pixel dimensions of a frame."""

    model_config = ConfigDict(frozen=True)

    width: int = Field(ge=2)
    height: int = Field(ge=2)

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.width, self.height))


class PartSpec(BaseModel):
    """One Gaussian body part in template units."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    id: int = Field(ge=1, le=20)
    name: str
    head: Point2
    tail: Point2
    sigma_along: PositiveFloat
    sigma_across: PositiveFloat

    @property
    def length(self) -> float:
        return float(np.hypot(self.tail.x - self.head.x, self.tail.y - self.head.y))


class TemplateSpec(BaseModel):
    """A named set of 18 body parts with adjacency and keypoint lookup."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    note: str = ""
    canvas: Canvas
    parts: tuple[PartSpec, ...]
    adjacency: tuple[tuple[int, Endpoint, int, Endpoint], ...]
    keypoint_map: dict[str, tuple[int, Endpoint]]
    mapping: PartMapping | None = None

    def part(self, part_id: int) -> PartSpec:
        for p in self.parts:
            if p.id == part_id:
                return p
        raise KeyError(part_id)

    def part_index(self, part_id: int) -> int:
        for i, p in enumerate(self.parts):
            if p.id == part_id:
                return i
        raise KeyError(part_id)

    def with_canvas(self, width: int, height: int) -> "TemplateSpec":
        return self.model_copy(update={"canvas": Canvas(width=width, height=height)})


class PoseEstimate(BaseModel):
    """A transformed template in pixel coordinates.

    covariances holds each part's pixel-space Gaussian covariance as (sxx, sxy, syy).
    """

    model_config = ConfigDict(frozen=True)

    canvas: Canvas
    part_names: dict[int, str]
    part_anchors: dict[int, tuple[Point2, Point2]]
    covariances: dict[int, tuple[float, float, float]]
    keypoints: dict[str, Point2]


def check_template(t: TemplateSpec) -> TemplateSpec:
    """Enforce structural invariants.

    Raises:
        TemplateValidationError: On part count, naming, adjacency or keypoint violations.
    """
    if len(t.parts) != len(PART_NAMES):
        raise TemplateValidationError(
            f"template '{t.name}' has {len(t.parts)} parts, expected {len(PART_NAMES)}"
        )
    ids = [p.id for p in t.parts]
    if len(set(ids)) != len(ids):
        raise TemplateValidationError(f"template '{t.name}' has duplicate part ids")
    names = [p.name for p in t.parts]
    if len(set(names)) != len(names):
        raise TemplateValidationError(f"template '{t.name}' has duplicate part names")
    if set(names) != set(PART_NAMES):
        unknown = sorted(set(names) - set(PART_NAMES))
        missing = sorted(set(PART_NAMES) - set(names))
        raise TemplateValidationError(
            f"template '{t.name}' part names differ: unknown={unknown} missing={missing}"
        )
    for p in t.parts:
        if p.head == p.tail and p.sigma_along != p.sigma_across:
            raise TemplateValidationError(
                f"part '{p.name}' has coincident anchors but anisotropic sigmas"
            )
    valid_ids = set(ids)
    for pair in t.adjacency:
        if pair[0] not in valid_ids or pair[2] not in valid_ids:
            raise TemplateValidationError(f"adjacency {list(pair)} references an unknown part id")
    if set(t.keypoint_map) != set(KEYPOINT_NAMES):
        raise TemplateValidationError(
            f"keypoint_map must cover exactly {sorted(KEYPOINT_NAMES)}, "
            f"got {sorted(t.keypoint_map)}"
        )
    for kp, (part_id, _) in t.keypoint_map.items():
        if part_id not in valid_ids:
            raise TemplateValidationError(f"keypoint '{kp}' references unknown part {part_id}")
    if t.mapping is not None:
        mapped = {n for names in t.mapping.coarse.values() for n in names}
        if mapped != set(PART_NAMES):
            raise TemplateValidationError("template mapping must coarse-map every part")
    return t


def _describe_validation_error(e: PydanticValidationError) -> tuple[bool, str]:
    schema = False
    details = []
    for err in e.errors():
        location = ".".join(str(x) for x in err["loc"]) or "<root>"
        details.append(f"{location}: {err['msg']}")
        kind = err["type"]
        if kind in _SCHEMA_ERROR_TYPES or kind.endswith("_type") or kind.endswith("_parsing"):
            schema = True
    return schema, "; ".join(details)


def parse_template(source: str) -> TemplateSpec:
    """Parse and validate template JSON text.

    Raises:
        SchemaError: Malformed JSON or missing/mistyped fields.
        TemplateValidationError: Structural invariant violations.
    """
    try:
        data = json.loads(source)
    except json.JSONDecodeError as e:
        raise SchemaError(f"template JSON invalid at line {e.lineno} col {e.colno}: {e.msg}") from e
    return template_from_dict(data)


def template_from_dict(data: Any) -> TemplateSpec:
    try:
        spec = TemplateSpec.model_validate(data)
    except PydanticValidationError as e:
        schema, details = _describe_validation_error(e)
        if schema:
            raise SchemaError(f"template schema error: {details}") from e
        raise TemplateValidationError(f"template invalid: {details}") from e
    return check_template(spec)


def resolve_template_path(name_or_path: str | Path) -> Path:
    """Resolve a preset name ("t_orig", "t_new") or a filesystem path."""
    if str(name_or_path) in PRESETS:
        resource = resources.files("posekit") / "data" / f"{name_or_path}.json"
        return Path(str(resource))
    return Path(name_or_path)


def load_template(name_or_path: str | Path) -> TemplateSpec:
    """Load a template from a preset name or a JSON file.

    Args:
        name_or_path: "t_orig", "t_new", or a path to template JSON

    Returns:
        Validated TemplateSpec
    """
    path = resolve_template_path(name_or_path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise SchemaError(f"cannot read template {path}: {e}") from e
    spec = parse_template(text)
    logger.debug(f"Loaded template '{spec.name}' from {path}")
    return spec


def template_to_json(t: TemplateSpec) -> str:
    data = t.model_dump(mode="json", exclude_none=True)
    return json.dumps(data, indent=2) + "\n"


def part_arrays(t: TemplateSpec) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Template-unit heads (P, 2), tails (P, 2) and covariances (P, 2, 2).

    The along-axis sigma is max(sigma_along, length / 2) so an elongated part
    covers its own segment.
    """
    heads = np.array([[p.head.x, p.head.y] for p in t.parts], dtype=np.float64)
    tails = np.array([[p.tail.x, p.tail.y] for p in t.parts], dtype=np.float64)
    cov = np.zeros((len(t.parts), 2, 2))
    for i, p in enumerate(t.parts):
        axis = tails[i] - heads[i]
        length = float(np.hypot(*axis))
        if length == 0.0:
            cov[i] = np.eye(2) * p.sigma_along**2
            continue
        u = axis / length
        n = np.array([-u[1], u[0]])
        along = max(p.sigma_along, length / 2.0)
        cov[i] = along**2 * np.outer(u, u) + p.sigma_across**2 * np.outer(n, n)
    return heads, tails, cov


def pixel_matrices(t: TemplateSpec, effective: FloatArray) -> FloatArray:
    """Compose the template-to-pixel map onto effective matrices (P, 3, 3)."""
    to_px = template_to_pixel(t.canvas.width, t.canvas.height).m
    return np.einsum("ij,pjk->pik", to_px, effective)


def pose_from_matrices(t: TemplateSpec, pixel_mats: FloatArray) -> PoseEstimate:
    """Build a PoseEstimate from per-part pixel-space matrices (template order)."""
    heads, tails, cov0 = part_arrays(t)
    lin = pixel_mats[:, :2, :2]
    off = pixel_mats[:, :2, 2]
    heads_px = np.einsum("pij,pj->pi", lin, heads) + off
    tails_px = np.einsum("pij,pj->pi", lin, tails) + off
    cov_px = lin @ cov0 @ lin.transpose(0, 2, 1)
    anchors: dict[int, tuple[Point2, Point2]] = {}
    covariances: dict[int, tuple[float, float, float]] = {}
    for i, p in enumerate(t.parts):
        anchors[p.id] = (
            Point2(float(heads_px[i, 0]), float(heads_px[i, 1])),
            Point2(float(tails_px[i, 0]), float(tails_px[i, 1])),
        )
        covariances[p.id] = (float(cov_px[i, 0, 0]), float(cov_px[i, 0, 1]), float(cov_px[i, 1, 1]))
    keypoints: dict[str, Point2] = {}
    for kp in KEYPOINT_NAMES:
        part_id, end = t.keypoint_map[kp]
        keypoints[kp] = anchors[part_id][0 if end == "head" else 1]
    return PoseEstimate(
        canvas=t.canvas,
        part_names={p.id: p.name for p in t.parts},
        part_anchors=anchors,
        covariances=covariances,
        keypoints=keypoints,
    )


def transform_template(t: TemplateSpec, transforms: Mapping[int, AffineTransform]) -> PoseEstimate:
    """Apply per-part transforms and map the result to pixels.

    Args:
        t: Template
        transforms: Part id -> transform in template units

    Raises:
        MissingTransformError: If any part lacks a transform.
    """
    missing = [p.id for p in t.parts if p.id not in transforms]
    if missing:
        raise MissingTransformError(f"no transform for part ids {missing}")
    effective = np.stack([transforms[p.id].m for p in t.parts])
    return pose_from_matrices(t, pixel_matrices(t, effective))


def identity_pose(t: TemplateSpec) -> PoseEstimate:
    identities = np.broadcast_to(np.eye(3), (len(t.parts), 3, 3))
    return pose_from_matrices(t, pixel_matrices(t, identities))
