"""Fit configuration and seed resolution.

Override files are YAML or JSON (YAML is a JSON superset) with the same keys
as FitConfig; unknown keys are rejected.
"""

import logging
import os
from pathlib import Path
from typing import Any

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, field_validator
from pydantic import ValidationError as PydanticValidationError

from .coarse2fine import Parameterization, TransformMode
from .errors import SchemaError
from .losses import EXTRACTORS, LossWeights

logger = logging.getLogger(__name__)

SEED_ENV = "POSEKIT_SEED"


class FitConfig(BaseModel):
    """Hyperparameters for per-frame gradient-descent fitting."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    mode: TransformMode = TransformMode.BASELINE18
    parameterization: Parameterization = Parameterization.FULL_AFFINE
    use_mse: bool = True
    weights: LossWeights = LossWeights()
    extractor: str = "identity"
    step_size: PositiveFloat = 0.05
    max_iters: PositiveInt = 500
    tol: float = Field(default=1e-7, ge=0.0)  # on relative loss decrease
    seed: int = 0
    warm_start: bool = False
    flip_augment: bool = False
    fine_freeze_fraction: float = Field(default=0.25, ge=0.0, le=1.0)
    max_backtracks: PositiveInt = 40
    armijo_c: float = Field(default=1e-4, gt=0.0, lt=1.0)
    shrink: float = Field(default=0.5, gt=0.0, lt=1.0)
    # pixels an in-frame anchor may step outside during the line search
    boundary_margin_px: float = Field(default=1.0, ge=0.0)

    @field_validator("extractor")
    @classmethod
    def _known_extractor(cls, v: str) -> str:
        if v not in EXTRACTORS:
            raise ValueError(f"unknown extractor '{v}', expected one of {sorted(EXTRACTORS)}")
        return v


def fit_config_from_dict(data: dict[str, Any]) -> FitConfig:
    """Validate a mapping into FitConfig.

    Raises:
        SchemaError: With dotted field locations on unknown or invalid keys.
    """
    try:
        return FitConfig.model_validate(data)
    except PydanticValidationError as e:
        details = "; ".join(
            f"{'.'.join(str(x) for x in err['loc']) or '<root>'}: {err['msg']}"
            for err in e.errors()
        )
        raise SchemaError(f"invalid fit config: {details}") from e


def load_fit_config(path: Path) -> FitConfig:
    """Load an override file into FitConfig.

    Raises:
        SchemaError: If the file is unreadable, not a mapping, or invalid.
    """
    return fit_config_from_dict(load_overrides(path))


def load_overrides(path: Path) -> dict[str, Any]:
    """Read an override file as a plain mapping (empty file -> {})."""
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise SchemaError(f"cannot read config {path}: {e}") from e
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark is not None else ""
        raise SchemaError(f"config {path} is not valid YAML/JSON{where}") from e
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise SchemaError(f"config {path} must be a mapping, got {type(data).__name__}")
    logger.debug(f"Loaded fit config overrides from {path}: {sorted(data)}")
    return data


def resolve_seed(flag: int | None, config_data: dict[str, Any] | None = None) -> int:
    """Seed from the --seed flag, then the override file, then POSEKIT_SEED, then 0."""
    if flag is not None:
        return flag
    if config_data and "seed" in config_data:
        return int(config_data["seed"])
    load_dotenv()
    raw = os.getenv(SEED_ENV)
    if raw:
        try:
            return int(raw)
        except ValueError:
            raise SchemaError(f"{SEED_ENV} must be an integer, got '{raw}'") from None
    return 0
