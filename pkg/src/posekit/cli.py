"""Command-line entry point for posekit.

Usage:
    posekit render TEMPLATE OUT_DIR [--canvas W H]
    posekit synth TEMPLATE OUT_DIR [--frames N] [--seed S]
    posekit fit TARGETS_DIR TEMPLATE OUT_DIR [--mode M] [--param P] [--config FILE]
    posekit eval GT PRED OUT_DIR [--threshold T]
    posekit compare REPORT
    posekit augment ANNOTATIONS OUT [--fraction F] [--seed S]

Exit codes: 0 success, 2 input/schema, 3 numeric failure, 4 data alignment,
1 anything else.
"""

import argparse
import hashlib
import json
import logging
import sys
from collections import Counter
from collections.abc import Sequence
from datetime import datetime
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict
from pydantic import ValidationError as PydanticValidationError

from . import __version__
from .annotations import FrameAnnotation, annotation_from_pose, read_annotations, write_annotations
from .coarse2fine import Parameterization, TransformMode
from .config import FitConfig, fit_config_from_dict, load_overrides, resolve_seed
from .errors import FrameIdMismatchError, NonFiniteLossError, PosekitError, SchemaError
from .fit import fit_sequence
from .flip import flip_annotation
from .metrics import bplp_consistency, pdj
from .pfm import list_stems, read_heatmap, write_heatmap
from .rendering import render
from .report_writer import (
    format_comparison,
    load_published_reference,
    load_report,
    write_report_csv,
    write_report_json,
)
from .synthetic import SyntheticSequenceSpec, generate_synthetic_sequence
from .template import identity_pose, load_template

logger = logging.getLogger(__name__)


class RunManifest(BaseModel):
    """What a command was run with and what it wrote."""

    model_config = ConfigDict(frozen=True)

    command: str
    version: str = __version__
    seed: int
    config: dict[str, Any]
    artifacts: dict[str, str]  # relative path -> sha256


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(
    out_dir: Path, command: str, seed: int, config: dict[str, Any], artifacts: Sequence[Path]
) -> Path:
    """Write manifest.json with sorted artifact hashes; no timestamps."""
    hashes = {p.relative_to(out_dir).as_posix(): sha256_file(p) for p in sorted(artifacts)}
    manifest = RunManifest(command=command, seed=seed, config=config, artifacts=hashes)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest.model_dump(mode="json"), indent=2, sort_keys=True) + "\n")
    return path


def _write_json(path: Path, data: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def cmd_render(args: argparse.Namespace) -> int:
    template = load_template(args.template)
    if args.canvas:
        template = template.with_canvas(*args.canvas)
    heatmap = render(template, windowed=args.windowed)
    out_dir = Path(args.out_dir)
    paths = write_heatmap(heatmap, out_dir, template.name)
    pose = identity_pose(template)
    keypoints = _write_json(
        out_dir / f"{template.name}.keypoints.json",
        {name: list(p) for name, p in pose.keypoints.items()},
    )
    config = {
        "template": str(args.template),
        "canvas": [template.canvas.width, template.canvas.height],
    }
    write_manifest(out_dir, "render", 0, config, [*paths, keypoints])
    logger.info(f"Rendered {len(paths)} channels of '{template.name}' to {out_dir}")
    return 0


def _parse_profile(items: Sequence[str]) -> dict[str, float]:
    profile = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep:
            raise SchemaError(f"--profile expects PART=FACTOR, got '{item}'")
        try:
            profile[name] = float(value)
        except ValueError:
            raise SchemaError(f"--profile factor for '{name}' is not a number: '{value}'") from None
    return profile


def cmd_synth(args: argparse.Namespace) -> int:
    template = load_template(args.template)
    if args.canvas:
        template = template.with_canvas(*args.canvas)
    seed = resolve_seed(args.seed)
    try:
        spec = SyntheticSequenceSpec(
            n_frames=args.frames,
            subject_bplp_profile=_parse_profile(args.profile),
            motion_amplitude=args.amplitude,
            noise_sigma=args.noise,
            seed=seed,
            subject_id=args.subject,
        )
    except PydanticValidationError as e:
        raise SchemaError(f"invalid synth options: {e.errors()[0]['msg']}") from e
    sequence = generate_synthetic_sequence(spec, template)
    out_dir = Path(args.out_dir)
    targets_dir = out_dir / "targets"
    artifacts: list[Path] = []
    for frame in sequence.frames:
        artifacts.extend(write_heatmap(frame.target, targets_dir, frame.annotation.frame_id))
    gt_path = write_annotations(
        out_dir / "ground_truth.jsonl", [f.annotation for f in sequence.frames]
    )
    transforms_path = _write_json(
        out_dir / "ground_truth_transforms.json",
        {f.annotation.frame_id: f.transforms.to_json() for f in sequence.frames},
    )
    artifacts.extend([gt_path, transforms_path])
    write_manifest(out_dir, "synth", seed, spec.model_dump(mode="json"), artifacts)
    logger.info(f"Wrote {len(sequence.frames)} synthetic frames to {out_dir}")
    return 0


def _fit_config(args: argparse.Namespace) -> tuple[FitConfig, int]:
    overrides = load_overrides(Path(args.config)) if args.config else {}
    seed = resolve_seed(args.seed, overrides)
    for key, value in (
        ("mode", args.mode),
        ("parameterization", args.param),
        ("use_mse", args.use_mse),
        ("flip_augment", args.flip_augment or None),
        ("max_iters", args.max_iters),
        ("extractor", args.extractor),
    ):
        if value is not None:
            overrides[key] = value
    overrides["seed"] = seed
    return fit_config_from_dict(overrides), seed


def cmd_fit(args: argparse.Namespace) -> int:
    cfg, seed = _fit_config(args)
    template = load_template(args.template)
    targets_dir = Path(args.targets_dir)
    stems = list_stems(targets_dir)
    if not stems:
        raise SchemaError(f"no <frame>.<part>.pfm targets found in {targets_dir}")
    channels = tuple(p.name for p in template.parts)
    targets = [read_heatmap(targets_dir, stem, channels) for stem in stems]
    template = template.with_canvas(targets[0].width, targets[0].height)

    logger.info(f"Fitting {len(targets)} frames: {cfg.mode}/{cfg.parameterization}")
    results = fit_sequence(targets, template, cfg, frame_ids=stems)

    out_dir = Path(args.out_dir)
    artifacts = [_write_json(out_dir / "fits" / f"{r.frame_id}.json", r.to_json()) for r in results]
    predictions = write_annotations(
        out_dir / "predictions.jsonl", [annotation_from_pose(r.pose, r.frame_id) for r in results]
    )
    log_path = out_dir / "fit_log.jsonl"
    with log_path.open("w") as f:
        for r in results:
            for iteration, report in enumerate(r.loss_trace):
                record = {"frame_id": r.frame_id, "iteration": iteration, **report.model_dump()}
                f.write(json.dumps(record) + "\n")
    artifacts.extend([predictions, log_path])
    if len(results) >= 2:
        part_bplp = bplp_consistency([r.pose for r in results])
        artifacts.append(_write_json(out_dir / "bplp.json", part_bplp.model_dump()))
        logger.info(f"Part-anchor BPLP-C: {part_bplp.bplp_c:.3f}")
    config = cfg.model_dump(mode="json") | {
        "template": str(args.template),
        "targets_dir": str(args.targets_dir),
        "parameter_count": results[0].transforms.n_parameters,
    }
    flip_scores = [r.flip_pdj for r in results if r.flip_pdj is not None]
    if flip_scores:
        config["flip_pdj"] = float(np.mean(flip_scores))
        logger.info(f"Direct vs mirrored fit PDJ: {config['flip_pdj']:.4f}, same when mirrored")
    write_manifest(out_dir, "fit", seed, config, artifacts)
    logger.info(f"Wrote {len(results)} predictions to {predictions}")
    return 0


def join_frames(
    gt: Sequence[FrameAnnotation], pred: Sequence[FrameAnnotation]
) -> tuple[list[FrameAnnotation], list[FrameAnnotation]]:
    """Strict one-to-one join on frame_id, ordered by frame_id.

    Raises:
        FrameIdMismatchError: Listing ids that are duplicated or unmatched.
    """
    duplicated = sorted(
        {k for k, n in Counter(a.frame_id for a in gt).items() if n > 1}
        | {k for k, n in Counter(a.frame_id for a in pred).items() if n > 1}
    )
    if duplicated:
        raise FrameIdMismatchError(f"duplicate frame ids: {duplicated}", missing=duplicated)
    gt_by_id = {a.frame_id: a for a in gt}
    pred_by_id = {a.frame_id: a for a in pred}
    missing = sorted(set(gt_by_id) ^ set(pred_by_id))
    if missing:
        raise FrameIdMismatchError(f"frame ids without a match: {missing}", missing=missing)
    ids = sorted(gt_by_id)
    return [gt_by_id[i] for i in ids], [pred_by_id[i] for i in ids]


def cmd_eval(args: argparse.Namespace) -> int:
    gt, pred = join_frames(read_annotations(Path(args.gt)), read_annotations(Path(args.pred)))
    metrics = pdj(gt, pred, threshold=args.threshold)
    bplp = bplp_consistency(pred) if len(pred) >= 2 else None
    if bplp is None:
        logger.warning("BPLP consistency needs at least 2 frames; section omitted")
    out_dir = Path(args.out_dir)
    write_report_json(out_dir / "report.json", metrics, bplp)
    write_report_csv(out_dir / "report.csv", metrics, bplp)
    logger.info(
        f"PDJ: {metrics.pdj:.4f}  L2: {metrics.l2:.3f}%  frames: {metrics.n_frames}"
    )
    if bplp is not None:
        logger.info(f"BPLP-C: {bplp.bplp_c:.3f}")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    report = load_report(Path(args.report))
    sys.stdout.write(format_comparison(report, load_published_reference()))
    return 0


def cmd_augment(args: argparse.Namespace) -> int:
    if not 0.0 <= args.fraction <= 1.0:
        raise SchemaError(f"--fraction must lie in [0, 1], got {args.fraction}")
    records = read_annotations(Path(args.annotations))
    seed = resolve_seed(args.seed)
    count = int(round(args.fraction * len(records)))
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(records), size=count, replace=False) if count else []
    chosen = {int(i) for i in picks}
    out = [flip_annotation(r) if i in chosen else r for i, r in enumerate(records)]
    write_annotations(Path(args.out), out)
    logger.info(f"Flipped {count} of {len(records)} records into {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posekit", description="posekit: template-based 2D pose fitting and evaluation"
    )
    parser.add_argument("--version", action="version", version=f"posekit {__version__}")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="Render a template to PFM heatmaps")
    p.add_argument("template", help="Preset name (t_orig, t_new) or template JSON path")
    p.add_argument("out_dir")
    p.add_argument("--canvas", nargs=2, type=int, metavar=("W", "H"))
    p.add_argument(
        "--windowed",
        action="store_true",
        help="Evaluate Gaussians inside their support window only",
    )
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("synth", help="Write a seeded synthetic sequence")
    p.add_argument("template")
    p.add_argument("out_dir")
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--amplitude", type=float, default=0.3)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--subject", default="s01")
    p.add_argument("--profile", nargs="*", default=[], metavar="PART=FACTOR")
    p.add_argument("--canvas", nargs=2, type=int, metavar=("W", "H"))
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="Fit poses to PFM targets")
    p.add_argument("targets_dir")
    p.add_argument("template")
    p.add_argument("out_dir")
    p.add_argument("--mode", choices=[m.value for m in TransformMode])
    p.add_argument("--param", choices=[v.value for v in Parameterization])
    p.add_argument("--use-mse", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--flip-augment", action="store_true")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--extractor", choices=["identity", "pyramid"])
    p.add_argument("--config", help="YAML/JSON FitConfig override file")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="Evaluate predictions against ground truth")
    p.add_argument("gt")
    p.add_argument("pred")
    p.add_argument("out_dir")
    p.add_argument("--threshold", type=float, default=0.05)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="Show a report beside published reference values")
    p.add_argument("report")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("augment", help="Flip a seeded fraction of annotation records")
    p.add_argument("annotations")
    p.add_argument("out")
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_augment)
    return parser


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )


def main(argv: Sequence[str] | None = None) -> int:
    """Main entry point.

    Returns:
        Exit code
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    logger.info("=" * 60)
    logger.info(f"posekit v{__version__} {args.command} starting at {datetime.now().isoformat()}")
    logger.info("=" * 60)

    try:
        code: int = args.func(args)
    except NonFiniteLossError as e:
        logger.error(f"Numeric failure: {e}")
        return e.exit_code
    except FrameIdMismatchError as e:
        logger.error(f"{e} (offending ids: {', '.join(e.missing)})")
        return e.exit_code
    except PosekitError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except Exception as e:
        logger.exception(f"{args.command} failed: {e}")
        return 1

    logger.info("=" * 60)
    logger.info(f"posekit {args.command} complete")
    logger.info("=" * 60)
    return code


if __name__ == "__main__":
    sys.exit(main())
