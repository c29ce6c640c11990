"""Evaluation report writer for posekit.

Writes metrics reports as JSON and CSV, and formats markdown comparison
tables against the published reference values.
"""

import csv
import json
import logging
from importlib import resources
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, ConfigDict, Field

from .errors import SchemaError
from .metrics import BplpReport, MetricsReport

logger = logging.getLogger(__name__)

REFERENCE_FILE = "published_reference.yaml"


class EvaluationRow(BaseModel):
    model: str
    pdj: float
    l2: float
    best: bool = False


class ReconRow(BaseModel):
    model: str
    recon_error: float
    pose_error: float


class BplpRow(BaseModel):
    model: str
    bplp_c: float
    best: bool = False


class PublishedReference(BaseModel):
    """Published numbers, loaded from the versioned data file."""

    model_config = ConfigDict(frozen=True)

    version: int
    label: str
    source: str = ""
    evaluation: list[EvaluationRow] = Field(default_factory=list)
    recon_vs_pose: list[ReconRow] = Field(default_factory=list)
    bplp_c: list[BplpRow] = Field(default_factory=list)


def format_delta(value: float, digits: int = 1) -> str:
    """Format a difference with an explicit sign.

    Args:
        value: Difference (this run minus reference)
        digits: Decimal places

    Returns:
        Formatted string like "+1.2" or "-0.5"
    """
    symbol = "+" if value >= 0 else ""
    return f"{symbol}{value:.{digits}f}"


def report_to_dict(metrics: MetricsReport, bplp: BplpReport | None = None) -> dict[str, Any]:
    data: dict[str, Any] = {"metrics": metrics.model_dump(mode="json")}
    if bplp is not None:
        data["bplp"] = bplp.model_dump(mode="json")
    return data


def write_report_json(path: Path, metrics: MetricsReport, bplp: BplpReport | None = None) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report_to_dict(metrics, bplp), indent=2, sort_keys=True) + "\n")
    return path


def report_rows(
    metrics: MetricsReport, bplp: BplpReport | None = None
) -> list[tuple[str, str, float]]:
    """Flatten reports into (metric, key, value) rows; key is empty for scalars."""
    rows: list[tuple[str, str, float]] = [
        ("pdj", "", metrics.pdj),
        ("l2", "", metrics.l2),
        ("n_frames", "", float(metrics.n_frames)),
        ("outliers", "", float(metrics.outliers)),
    ]
    rows.extend(("per_joint", k, v) for k, v in metrics.per_joint.items())
    rows.extend(("region", k, v) for k, v in metrics.regions.items())
    rows.extend(("side_gap", k, v) for k, v in metrics.side_gap.items())
    if bplp is not None:
        rows.append(("bplp_c", "", bplp.bplp_c))
        rows.extend(("bplp_std", k, v) for k, v in bplp.per_limb_std.items())
        rows.extend(("bplp_left_right_gap", k, v) for k, v in bplp.left_right_gap.items())
    return rows


def write_report_csv(path: Path, metrics: MetricsReport, bplp: BplpReport | None = None) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["metric", "key", "value"])
        for metric, key, value in report_rows(metrics, bplp):
            writer.writerow([metric, key, repr(value)])
    return path


def load_report(path: Path) -> dict[str, Any]:
    """Read a JSON report written by write_report_json.

    Raises:
        SchemaError: If the file is unreadable or lacks a metrics section.
    """
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise SchemaError(f"cannot read report {path}: {e}") from e
    if not isinstance(data, dict) or "metrics" not in data:
        raise SchemaError(f"report {path} has no 'metrics' section")
    return data


def load_published_reference(path: Path | None = None) -> PublishedReference:
    """Load reference values from the shipped data file or an explicit path."""
    if path is None:
        text = (resources.files("posekit") / "data" / REFERENCE_FILE).read_text(encoding="utf-8")
    else:
        text = path.read_text(encoding="utf-8")
    return PublishedReference.model_validate(yaml.safe_load(text))


def format_comparison(report: dict[str, Any], reference: PublishedReference) -> str:
    """Markdown tables of this run's metrics beside the published reference values.

    PDJ is shown in percent on both sides. Missing report sections are shown
    as absent rows.
    """
    metrics = report.get("metrics", {})
    bplp = report.get("bplp")
    best = next((r for r in reference.evaluation if r.best), None)
    pdj = metrics.get("pdj")
    l2 = metrics.get("l2")

    lines = [
        "# posekit comparison",
        "",
        f"Reference rows are labeled \"{reference.label}\".",
        *([f"Values {reference.source}.", ""] if reference.source else [""]),
        "## Evaluation Metrics",
        "",
        "| Source | Model | PDJ | L2 Error | PDJ delta vs best | L2 delta vs best |",
        "|--------|-------|-----|----------|-------------------|------------------|",
    ]
    if pdj is not None and l2 is not None:
        pdj_pct = pdj * 100.0
        pdj_delta = format_delta(pdj_pct - best.pdj) if best else "n/a"
        l2_delta = format_delta(l2 - best.l2) if best else "n/a"
        lines.append(f"| this run | | {pdj_pct:.1f} | {l2:.2f} | {pdj_delta} | {l2_delta} |")
    else:
        lines.append("| this run | | absent | absent | n/a | n/a |")
    for row in reference.evaluation:
        name = f"{row.model} (best model)" if row.best else row.model
        lines.append(f"| {reference.label} | {name} | {row.pdj} | {row.l2} | | |")

    lines.extend(
        [
            "",
            "## Reconstruction vs Pose Error",
            "",
            "| Source | Model | Recon Error | Pose Error (L2) |",
            "|--------|-------|-------------|-----------------|",
        ]
    )
    for recon in reference.recon_vs_pose:
        lines.append(
            f"| {reference.label} | {recon.model} | {recon.recon_error} | {recon.pose_error} |"
        )

    lines.extend(
        [
            "",
            "## BPLP Consistency",
            "",
            "| Source | Model | BPLP-C |",
            "|--------|-------|--------|",
        ]
    )
    if bplp is not None and "bplp_c" in bplp:
        lines.append(f"| this run | | {bplp['bplp_c']:.2f} |")
    else:
        lines.append("| this run | | absent |")
    for b in reference.bplp_c:
        name = f"{b.model} (constrained, highest)" if b.best else b.model
        lines.append(f"| {reference.label} | {name} | {b.bplp_c} |")
    return "\n".join(lines) + "\n"
