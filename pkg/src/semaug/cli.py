"""Command-line entry point wiring the pipeline stages for batch runs.

Subcommands mirror the pipeline stages so the expensive one (image
generation) can be re-run independently of the cheap ones:

    augment   plan caption rewrites only, write them as JSON for inspection
    build     full pipeline: plan, generate, write dataset, mix, stats
    mix       re-mix an existing build output against the original dataset
    validate  run referential-integrity checks over annotation files
    stats     summarize an existing manifest

Configuration comes from a JSON file (``--config``); the ``--seed``,
``--ratio``, ``--backend`` and ``--out`` flags override file values, and the
``SEMAUG_BACKEND_URL`` environment variable overrides the configured remote
endpoint. Exit codes: 0 ok, 1 validation violations, 2 config error,
3 parse error, 4 generation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

from . import builder
from .augment import AugmentationConfig
from .coco import CocoError, Dataset, parse_dataset, parse_records, validate
from .embeddings import EmbeddingError, EmbeddingTable, load_embeddings
from .generation import BackendConfig, GenerationError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_PARSE = 3
EXIT_GENERATION = 4


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    dataset_path: Path
    embeddings_path: Path
    out_dir: Path
    ratio: float
    run_seed: int
    augmentation: AugmentationConfig
    backend: BackendConfig
    images_root: Optional[Path] = None  # where original image files live
    image_width: int = 512
    image_height: int = 512


def load_run_config(
    config_path: str,
    *,
    seed: Optional[int] = None,
    ratio: Optional[float] = None,
    backend_kind: Optional[str] = None,
    out_dir: Optional[str] = None,
) -> RunConfig:
    """Read the JSON config file and fold in flag overrides."""
    path = Path(config_path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")

    def require(key: str) -> object:
        if key not in raw:
            raise ConfigError(f"config missing required key: {key}")
        return raw[key]

    try:
        augmentation = AugmentationConfig.from_dict(raw.get("augmentation", {}))
        backend = BackendConfig.from_dict(raw.get("backend", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if backend_kind is not None and backend_kind != backend.kind:
        try:
            backend = replace(backend, kind=backend_kind)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    final_ratio = float(ratio if ratio is not None else require("ratio"))
    if final_ratio < 0:
        raise ConfigError("ratio must be nonnegative")
    final_seed = int(seed if seed is not None else require("seed"))
    if not 0 <= final_seed < 2**64:
        raise ConfigError("seed must fit in an unsigned 64-bit integer")

    # paths are resolved relative to the config file so configs are portable
    def resolve(value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else path.parent / p

    cfg = RunConfig(
        dataset_path=resolve(str(require("dataset"))),
        embeddings_path=resolve(str(require("embeddings"))),
        out_dir=resolve(str(out_dir if out_dir is not None else require("out_dir"))),
        ratio=final_ratio,
        run_seed=final_seed,
        augmentation=augmentation,
        backend=backend,
        images_root=resolve(str(raw["images_root"])) if "images_root" in raw else None,
        image_width=int(raw.get("image_width", 512)),
        image_height=int(raw.get("image_height", 512)),
    )
    for label, input_path in (("dataset", cfg.dataset_path), ("embeddings", cfg.embeddings_path)):
        if not input_path.exists():
            raise ConfigError(f"{label} path does not exist: {input_path}")
    return cfg


def _load_inputs(cfg: RunConfig) -> tuple[Dataset, EmbeddingTable]:
    dataset = parse_dataset(cfg.dataset_path.read_bytes())
    with cfg.embeddings_path.open("r", encoding="utf-8") as fh:
        table = load_embeddings(fh)
    return dataset, table


def _plan(cfg: RunConfig) -> list[builder.GenerationJob]:
    dataset, table = _load_inputs(cfg)
    return builder.plan_augmentation(
        dataset,
        cfg.augmentation,
        cfg.ratio,
        cfg.run_seed,
        table,
        image_width=cfg.image_width,
        image_height=cfg.image_height,
    )


def cmd_augment(cfg: RunConfig) -> int:
    jobs = _plan(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    out_file = cfg.out_dir / "augmented_captions.json"
    doc = [job.augmented.to_dict() for job in jobs]
    out_file.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", "utf-8")
    print(f"wrote {len(jobs)} augmented captions to {out_file}")
    return EXIT_OK


def _relative_images_root(cfg: RunConfig) -> str:
    """Original-image prefix, relative to out_dir so manifests stay portable.

    Manifest entries resolve from the manifest's own directory; writing
    originals relative to it keeps the file byte-identical however the
    config path was spelled on the command line.
    """
    if cfg.images_root is None:
        return ""
    return os.path.relpath(cfg.images_root.resolve(), cfg.out_dir.resolve())


def _print_stats(report: builder.StatsReport) -> None:
    print(
        f"manifest entries: {report.total_entries} "
        f"({report.originals} original, {report.augmented} augmented)"
    )
    if report.by_strategy:
        parts = " ".join(f"{k}={v}" for k, v in sorted(report.by_strategy.items()))
        print(f"by strategy: {parts}")
    print(
        f"categories present: {len(report.category_counts_original)} original, "
        f"{len(report.category_counts_mixed)} mixed"
    )
    shifts = sorted(report.label_freq_delta.items(), key=lambda kv: -abs(kv[1]))[:5]
    if shifts:
        parts = " ".join(f"{cid}:{delta:+.3f}" for cid, delta in shifts)
        print(f"largest frequency shifts: {parts}")


def cmd_build(cfg: RunConfig) -> int:
    original, table = _load_inputs(cfg)
    jobs = builder.plan_augmentation(
        original,
        cfg.augmentation,
        cfg.ratio,
        cfg.run_seed,
        table,
        image_width=cfg.image_width,
        image_height=cfg.image_height,
    )
    base_image_id = max((img.id for img in original.images), default=0)
    augmented = builder.build_augmented_dataset(
        jobs, cfg.backend, cfg.out_dir, original.taxonomy, base_image_id
    )
    failed = len(jobs) - len(augmented.images)
    if failed:
        print(f"{failed} of {len(jobs)} generation jobs failed; see failures.json")

    manifest = builder.mix(
        original, augmented, cfg.ratio, cfg.run_seed,
        original_images_root=_relative_images_root(cfg),
    )
    (cfg.out_dir / "manifest.json").write_text(manifest.to_json(), "utf-8")
    _print_stats(builder.stats(manifest))

    missing = builder.missing_manifest_files(manifest, cfg.out_dir)
    if missing:
        if cfg.images_root is not None:
            logger.warning("%d manifest files missing on disk, e.g. %s", len(missing), missing[0])
        else:
            logger.info(
                "original image files not checked (no images_root configured); "
                "%d manifest entries unresolved", len(missing),
            )
    return EXIT_OK


def cmd_mix(cfg: RunConfig) -> int:
    original, _ = _load_inputs(cfg)
    augmented_path = cfg.out_dir / "annotations.json"
    if not augmented_path.exists():
        raise ConfigError(f"no built dataset at {augmented_path}; run `build` first")
    augmented = parse_dataset(augmented_path.read_bytes())
    manifest = builder.mix(
        original, augmented, cfg.ratio, cfg.run_seed,
        original_images_root=_relative_images_root(cfg),
    )
    (cfg.out_dir / "manifest.json").write_text(manifest.to_json(), "utf-8")
    _print_stats(builder.stats(manifest))
    return EXIT_OK


def cmd_validate(paths: Sequence[str]) -> int:
    worst = EXIT_OK
    for path_str in paths:
        path = Path(path_str)
        if not path.exists():
            print(f"{path}: file not found")
            worst = max(worst, EXIT_CONFIG)
            continue
        try:
            dataset = parse_records(path.read_bytes())
        except CocoError as exc:
            print(f"{path}: parse error: {exc}")
            worst = max(worst, EXIT_PARSE)
            continue
        report = validate(dataset)
        if report.ok():
            print(f"{path}: ok")
        else:
            for violation in report.violations:
                print(f"{path}: {violation.code} {violation.kind} id={violation.id}: {violation.message}")
            worst = max(worst, EXIT_VALIDATION)
    return worst


def cmd_stats(cfg: RunConfig) -> int:
    manifest_path = cfg.out_dir / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"no manifest at {manifest_path}; run `build` or `mix` first")
    manifest = builder.MixManifest.from_json(manifest_path.read_text("utf-8"))
    _print_stats(builder.stats(manifest))
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semaug",
        description="Augment caption datasets and synthesize matching images.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="JSON run configuration file")
        p.add_argument("--seed", type=int, default=None, help="override run seed")
        p.add_argument("--ratio", type=float, default=None, help="override augmentation ratio")
        p.add_argument(
            "--backend", choices=["mock", "remote"], default=None, help="override backend kind"
        )
        p.add_argument("--out", default=None, help="override output directory")

    add_config_flags(sub.add_parser("augment", help="plan caption rewrites, no image generation"))
    add_config_flags(sub.add_parser("build", help="full pipeline: generate images, mix, report"))
    add_config_flags(sub.add_parser("mix", help="re-mix an existing build output"))
    add_config_flags(sub.add_parser("stats", help="summarize an existing manifest"))

    p_validate = sub.add_parser("validate", help="check annotation files for integrity violations")
    p_validate.add_argument("paths", nargs="+", help="annotation JSON files")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate(args.paths)
        cfg = load_run_config(
            args.config,
            seed=args.seed,
            ratio=args.ratio,
            backend_kind=args.backend,
            out_dir=args.out,
        )
        if args.command == "augment":
            return cmd_augment(cfg)
        if args.command == "build":
            return cmd_build(cfg)
        if args.command == "mix":
            return cmd_mix(cfg)
        if args.command == "stats":
            return cmd_stats(cfg)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except builder.RatioUnsatisfiable as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except builder.OutputNotWritable as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CocoError, EmbeddingError, builder.NoCaptionsForImage) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (GenerationError, builder.AllJobsFailed) as exc:
        print(f"generation failed: {exc}", file=sys.stderr)
        return EXIT_GENERATION


def run() -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(main())


if __name__ == "__main__":
    run()
