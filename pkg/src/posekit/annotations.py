"""Frame annotations: 15 named keypoints per frame, stored as JSON Lines.

One object per line:
    {"frame_id": ..., "subject_id": ..., "image_size": [W, H], "keypoints": {name: [x, y]}}

Coordinates are snapped to a 2^-20 px lattice on construction, so mirroring
x -> (W - 1) - x is exact in float64.
"""

import json
import logging
import math
from collections.abc import Iterable
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, field_validator
from pydantic import ValidationError as PydanticValidationError

from .body import KEYPOINT_NAMES
from .errors import SchemaError
from .geometry import Point2
from .template import PoseEstimate

logger = logging.getLogger(__name__)

LATTICE = 2.0**-20


def snap(value: float) -> float:
    return round(value / LATTICE) * LATTICE


class FrameAnnotation(BaseModel):
    """Ground-truth or predicted keypoints for one frame."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    frame_id: str
    subject_id: str = ""
    image_size: tuple[int, int] = Field(description="(width, height) in pixels")
    keypoints: dict[str, Point2]
    flipped: bool = False  # provenance: produced by flip augmentation

    @field_validator("image_size")
    @classmethod
    def _positive_size(cls, v: tuple[int, int]) -> tuple[int, int]:
        if v[0] < 1 or v[1] < 1:
            raise ValueError(f"image_size must be positive, got {v}")
        return v

    @field_validator("keypoints")
    @classmethod
    def _canonical_keypoints(cls, v: dict[str, Point2]) -> dict[str, Point2]:
        if set(v) != set(KEYPOINT_NAMES):
            missing = sorted(set(KEYPOINT_NAMES) - set(v))
            unknown = sorted(set(v) - set(KEYPOINT_NAMES))
            raise ValueError(
                f"keypoints must be the 15 named joints: missing={missing} unknown={unknown}"
            )
        for name, p in v.items():
            if not (math.isfinite(p.x) and math.isfinite(p.y)):
                raise ValueError(f"keypoint '{name}' is not finite")
        return {name: Point2(snap(v[name].x), snap(v[name].y)) for name in KEYPOINT_NAMES}

    @property
    def width(self) -> int:
        return self.image_size[0]

    @property
    def height(self) -> int:
        return self.image_size[1]


def annotation_from_pose(
    pose: PoseEstimate, frame_id: str, subject_id: str = ""
) -> FrameAnnotation:
    """Record a pose estimate's keypoints as a prediction annotation."""
    return FrameAnnotation(
        frame_id=frame_id,
        subject_id=subject_id,
        image_size=(pose.canvas.width, pose.canvas.height),
        keypoints=dict(pose.keypoints),
    )


def annotation_to_json(a: FrameAnnotation) -> str:
    """One JSONL record; the flipped flag is written only when set."""
    return json.dumps(a.model_dump(mode="json", exclude=None if a.flipped else {"flipped"}))


def parse_annotation_line(line: str, lineno: int = 1) -> FrameAnnotation:
    """Parse one JSONL record.

    Raises:
        SchemaError: With the line number on malformed JSON or fields.
    """
    try:
        data = json.loads(line)
    except json.JSONDecodeError as e:
        raise SchemaError(f"line {lineno}: invalid JSON at col {e.colno}: {e.msg}") from e
    try:
        return FrameAnnotation.model_validate(data)
    except PydanticValidationError as e:
        details = "; ".join(
            f"{'.'.join(str(x) for x in err['loc']) or '<root>'}: {err['msg']}"
            for err in e.errors()
        )
        raise SchemaError(f"line {lineno}: {details}") from e


def read_annotations(path: Path) -> list[FrameAnnotation]:
    """Read a JSONL annotation file; blank lines are skipped.

    Raises:
        SchemaError: If the file cannot be read or a record is malformed.
    """
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise SchemaError(f"cannot read annotations {path}: {e}") from e
    records = [
        parse_annotation_line(line, lineno)
        for lineno, line in enumerate(text.splitlines(), start=1)
        if line.strip()
    ]
    logger.debug(f"Read {len(records)} annotations from {path}")
    return records


def write_annotations(path: Path, records: Iterable[FrameAnnotation]) -> Path:
    """Write records as JSON Lines in the given order."""
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [annotation_to_json(r) for r in records]
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path
