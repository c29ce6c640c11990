"""Coarse-to-fine transform sets.

Baseline mode uses one matrix per part. Coarse-to-fine mode uses 20 matrices:
M1..M14 warp the template to a coarse estimate (M10/M11 move whole arms) and
M15..M20 refine the six arm segments. A part with a fine matrix F and coarse
matrix C gets the effective affine F @ C. Fine matrices act in template
coordinates.

In the constrained parameterization every matrix is R(theta) @ L(mu, delta);
the frame scale S(phi, beta) multiplies the coarse (or baseline) matrices only,
so identity fine matrices exist and scale is never applied twice.
"""

from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum
from typing import TYPE_CHECKING, Any

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .body import ARM_PARTS, PART_NAMES
from .errors import ModeMismatchError
from .geometry import (
    AffineTransform,
    ConstrainedTransformParams,
    FloatArray,
    FrameScale,
    build_constrained,
    build_rigid,
    compose,
    constrained_matrix_derivatives,
    identity,
    inverse,
)

if TYPE_CHECKING:
    from .template import TemplateSpec

COARSE_COUNT = 14


class TransformMode(StrEnum):
    BASELINE18 = "baseline18"
    COARSE2FINE20 = "coarse2fine20"


class Parameterization(StrEnum):
    FULL_AFFINE = "full_affine"
    CONSTRAINED = "constrained"


MATRIX_COUNTS = {TransformMode.BASELINE18: 18, TransformMode.COARSE2FINE20: 20}


def parameter_count(mode: TransformMode, parameterization: Parameterization) -> int:
    """Number of free transform parameters.

    Constrained: three per matrix plus the shared (phi, beta).
    Full affine: six per matrix.
    """
    n = MATRIX_COUNTS[TransformMode(mode)]
    if Parameterization(parameterization) is Parameterization.CONSTRAINED:
        return n * 3 + 2
    return n * 6


class PartMapping(BaseModel):
    """Assignment of transform matrices (1-based) to part names."""

    model_config = ConfigDict(frozen=True)

    coarse: dict[int, tuple[str, ...]]
    fine: dict[int, str]

    @model_validator(mode="after")
    def _check_coverage(self) -> "PartMapping":
        if sorted(self.coarse) != list(range(1, COARSE_COUNT + 1)):
            raise ValueError(f"coarse mapping must use matrices 1..{COARSE_COUNT}")
        if sorted(self.fine) != list(range(COARSE_COUNT + 1, 21)):
            raise ValueError(f"fine mapping must use matrices {COARSE_COUNT + 1}..20")
        coarse_parts = [name for names in self.coarse.values() for name in names]
        if len(coarse_parts) != len(set(coarse_parts)):
            raise ValueError("a part is coarse-mapped more than once")
        fine_parts = list(self.fine.values())
        if len(fine_parts) != len(set(fine_parts)):
            raise ValueError("a part is fine-mapped more than once")
        unmapped = set(fine_parts) - set(coarse_parts)
        if unmapped:
            raise ValueError(f"fine-mapped parts without a coarse matrix: {sorted(unmapped)}")
        return self

    def coarse_index(self, part_name: str) -> int:
        for index, names in self.coarse.items():
            if part_name in names:
                return index
        raise ModeMismatchError(f"part '{part_name}' has no coarse matrix")

    def fine_index(self, part_name: str) -> int | None:
        for index, name in self.fine.items():
            if name == part_name:
                return index
        return None


def default_mapping() -> PartMapping:
    """The standard two-step arm refinement mapping."""
    coarse: dict[int, tuple[str, ...]] = {
        1: ("core",),
        2: ("left_hip",),
        3: ("right_hip",),
        4: ("left_thigh",),
        5: ("right_thigh",),
        6: ("left_shin",),
        7: ("right_shin",),
        8: ("left_shoulder",),
        9: ("right_shoulder",),
        10: ("left_upper_arm", "left_forearm", "left_hand"),
        11: ("right_upper_arm", "right_forearm", "right_hand"),
        12: ("left_foot",),
        13: ("right_foot",),
        14: ("head",),
    }
    fine = {COARSE_COUNT + 1 + i: name for i, name in enumerate(ARM_PARTS)}
    return PartMapping(coarse=coarse, fine=fine)


def mapping_to_json(mapping: PartMapping) -> dict[str, Any]:
    """Serialize for the template sidecar key "mapping"."""
    return mapping.model_dump(mode="json")


@dataclass(frozen=True)
class TransformSet:
    """Per-frame transform parameters for one mode and parameterization."""

    mode: TransformMode
    parameterization: Parameterization
    affines: tuple[AffineTransform, ...] = ()
    limb_params: tuple[ConstrainedTransformParams, ...] = ()
    scale: FrameScale | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", TransformMode(self.mode))
        object.__setattr__(self, "parameterization", Parameterization(self.parameterization))
        n = MATRIX_COUNTS[self.mode]
        if self.parameterization is Parameterization.FULL_AFFINE:
            if len(self.affines) != n or self.limb_params or self.scale is not None:
                raise ModeMismatchError(
                    f"{self.mode} full_affine needs {n} affines, got {len(self.affines)}"
                )
        else:
            if len(self.limb_params) != n or self.scale is None or self.affines:
                raise ModeMismatchError(
                    f"{self.mode} constrained needs {n} limb params and a frame scale"
                )

    @property
    def n_matrices(self) -> int:
        return MATRIX_COUNTS[self.mode]

    @property
    def n_parameters(self) -> int:
        return parameter_count(self.mode, self.parameterization)

    def is_scaled(self, index: int) -> bool:
        """Whether matrix `index` (0-based) carries the frame scale."""
        return self.mode is TransformMode.BASELINE18 or index < COARSE_COUNT

    def matrices(self) -> list[AffineTransform]:
        if self.parameterization is Parameterization.FULL_AFFINE:
            return list(self.affines)
        assert self.scale is not None
        return [
            build_constrained(c, self.scale) if self.is_scaled(i) else build_rigid(c)
            for i, c in enumerate(self.limb_params)
        ]

    def to_vector(self) -> FloatArray:
        """Flatten to a parameter vector of length parameter_count."""
        if self.parameterization is Parameterization.FULL_AFFINE:
            return np.concatenate([t.m[:2].reshape(-1) for t in self.affines])
        assert self.scale is not None
        limbs = [(c.theta, c.mu, c.delta) for c in self.limb_params]
        return np.concatenate([np.asarray(limbs).reshape(-1), [self.scale.phi, self.scale.beta]])

    @classmethod
    def from_vector(
        cls,
        mode: TransformMode,
        parameterization: Parameterization,
        vector: Sequence[float] | FloatArray,
    ) -> "TransformSet":
        vec = np.asarray(vector, dtype=np.float64)
        expected = parameter_count(mode, parameterization)
        if vec.shape != (expected,):
            raise ModeMismatchError(
                f"{mode}/{parameterization} needs {expected} parameters, got {vec.shape}"
            )
        n = MATRIX_COUNTS[TransformMode(mode)]
        if Parameterization(parameterization) is Parameterization.FULL_AFFINE:
            rows = vec.reshape(n, 2, 3)
            affines = tuple(
                AffineTransform(np.vstack([r, (0.0, 0.0, 1.0)])) for r in rows
            )
            return cls(mode, parameterization, affines=affines)
        limbs = vec[:-2].reshape(n, 3)
        return cls(
            mode,
            parameterization,
            limb_params=tuple(ConstrainedTransformParams(*map(float, row)) for row in limbs),
            scale=FrameScale(float(vec[-2]), float(vec[-1])),
        )

    @classmethod
    def identity(
        cls, mode: TransformMode, parameterization: Parameterization
    ) -> "TransformSet":
        n = MATRIX_COUNTS[TransformMode(mode)]
        if Parameterization(parameterization) is Parameterization.FULL_AFFINE:
            return cls(mode, parameterization, affines=tuple(identity() for _ in range(n)))
        return cls(
            mode,
            parameterization,
            limb_params=tuple(ConstrainedTransformParams() for _ in range(n)),
            scale=FrameScale(),
        )

    def fine_parameter_mask(self) -> FloatArray:
        """1.0 for coarse/baseline parameters, 0.0 for fine-matrix parameters."""
        mask = np.ones(self.n_parameters)
        if self.mode is TransformMode.COARSE2FINE20:
            per = 6 if self.parameterization is Parameterization.FULL_AFFINE else 3
            mask[COARSE_COUNT * per : self.n_matrices * per] = 0.0
        return mask

    def pullback(self, matrix_grads: FloatArray) -> FloatArray:
        """Chain a gradient w.r.t. matrix top rows (K, 2, 3) onto the parameter vector."""
        if self.parameterization is Parameterization.FULL_AFFINE:
            return np.asarray(matrix_grads, dtype=np.float64).reshape(-1)
        assert self.scale is not None
        unit = FrameScale()
        out = np.zeros(self.n_parameters)
        for k, c in enumerate(self.limb_params):
            scaled = self.is_scaled(k)
            derivs = constrained_matrix_derivatives(c, self.scale if scaled else unit)
            partial = np.einsum("dij,ij->d", derivs[:, :2, :], matrix_grads[k])
            out[3 * k : 3 * k + 3] = partial[:3]
            if scaled:
                out[-2:] += partial[3:]
        return out

    def to_json(self) -> dict[str, Any]:
        return {
            "mode": str(self.mode),
            "parameterization": str(self.parameterization),
            "vector": [float(v) for v in self.to_vector()],
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "TransformSet":
        return cls.from_vector(
            TransformMode(data["mode"]), Parameterization(data["parameterization"]), data["vector"]
        )


@dataclass(frozen=True)
class EffectivePlan:
    """Per template part (in template order): 0-based coarse and fine matrix indices."""

    part_ids: tuple[int, ...]
    coarse: tuple[int, ...]
    fine: tuple[int, ...]  # -1 where a part has no fine matrix


def effective_plan(
    mode: TransformMode, mapping: PartMapping, template: "TemplateSpec"
) -> EffectivePlan:
    names = [p.name for p in template.parts]
    ids = tuple(p.id for p in template.parts)
    if len(names) != len(PART_NAMES):
        raise ModeMismatchError(f"template has {len(names)} parts, expected {len(PART_NAMES)}")
    if TransformMode(mode) is TransformMode.BASELINE18:
        return EffectivePlan(ids, tuple(range(len(names))), tuple(-1 for _ in names))
    coarse = tuple(mapping.coarse_index(name) - 1 for name in names)
    fine = tuple((mapping.fine_index(name) or 0) - 1 for name in names)
    return EffectivePlan(ids, coarse, fine)


def effective_matrices(ts: TransformSet, plan: EffectivePlan) -> FloatArray:
    """Stack of effective 3x3 matrices, one per part in plan order."""
    mats = np.stack([t.m for t in ts.matrices()])
    out = mats[list(plan.coarse)].copy()
    for p, f in enumerate(plan.fine):
        if f >= 0:
            out[p] = mats[f] @ out[p]
            out[p, 2] = (0.0, 0.0, 1.0)
    return out


def effective_pullback(ts: TransformSet, plan: EffectivePlan, part_grads: FloatArray) -> FloatArray:
    """Chain per-part effective gradients (P, 2, 3) back onto matrix gradients (K, 2, 3).

    Contributions are summed in fixed part order.
    """
    mats = np.stack([t.m for t in ts.matrices()])
    grads = np.zeros((ts.n_matrices, 2, 3))
    for p, (c, f) in enumerate(zip(plan.coarse, plan.fine, strict=True)):
        g = part_grads[p]
        if f < 0:
            grads[c] += g
            continue
        g3 = np.zeros((3, 3))
        g3[:2] = g
        grads[f] += (g3 @ mats[c].T)[:2]
        grads[c] += (mats[f].T @ g3)[:2]
    return grads


def effective_affines(
    ts: TransformSet, mapping: PartMapping, template: "TemplateSpec"
) -> dict[int, AffineTransform]:
    """Per-part effective transforms keyed by part id.

    Raises:
        ModeMismatchError: If the set, mapping and template disagree.
    """
    plan = effective_plan(ts.mode, mapping, template)
    matrices = ts.matrices()
    result: dict[int, AffineTransform] = {}
    for part_id, c, f in zip(plan.part_ids, plan.coarse, plan.fine, strict=True):
        result[part_id] = matrices[c] if f < 0 else compose(matrices[f], matrices[c])
    return result


def embed_baseline(
    ts: TransformSet, mapping: PartMapping, template: "TemplateSpec"
) -> TransformSet:
    """Lift a baseline18 set into an equivalent coarse2fine20 set.

    Each coarse group takes the transform of its first part; the remaining
    parts of the group get fine matrices F = M_part @ M_first^-1.
    """
    if ts.mode is not TransformMode.BASELINE18:
        raise ModeMismatchError(f"embed_baseline needs a baseline18 set, got {ts.mode}")
    by_name = {p.name: i for i, p in enumerate(template.parts)}
    n = MATRIX_COUNTS[TransformMode.COARSE2FINE20]

    def anchor_of(index: int) -> str:
        return mapping.coarse[index][0]

    def check_group(index: int) -> None:
        for name in mapping.coarse[index][1:]:
            if mapping.fine_index(name) is None:
                raise ModeMismatchError(f"part '{name}' shares a coarse matrix without a fine one")

    if ts.parameterization is Parameterization.FULL_AFFINE:
        affines: list[AffineTransform] = [identity()] * n
        for index in mapping.coarse:
            check_group(index)
            affines[index - 1] = ts.affines[by_name[anchor_of(index)]]
        for index, name in mapping.fine.items():
            first = ts.affines[by_name[anchor_of(mapping.coarse_index(name))]]
            affines[index - 1] = compose(ts.affines[by_name[name]], inverse(first))
        return TransformSet(
            TransformMode.COARSE2FINE20, ts.parameterization, affines=tuple(affines)
        )

    limbs: list[ConstrainedTransformParams] = [ConstrainedTransformParams()] * n
    for index in mapping.coarse:
        check_group(index)
        limbs[index - 1] = ts.limb_params[by_name[anchor_of(index)]]
    for index, name in mapping.fine.items():
        first = ts.limb_params[by_name[anchor_of(mapping.coarse_index(name))]]
        part = ts.limb_params[by_name[name]]
        d0, d1 = part.mu - first.mu, part.delta - first.delta
        cos, sin = np.cos(first.theta), np.sin(first.theta)
        limbs[index - 1] = ConstrainedTransformParams(
            part.theta - first.theta, float(cos * d0 + sin * d1), float(-sin * d0 + cos * d1)
        )
    return TransformSet(
        TransformMode.COARSE2FINE20, ts.parameterization, limb_params=tuple(limbs), scale=ts.scale
    )
