"""Pipeline orchestration: plan augmentations, build the augmented dataset, mix.

Planning walks the original images in ascending id order, cycling as many
times as the augmentation ratio requires, picks one caption per visit, and
rewrites it. Building drives the generation backend and writes a standalone
COCO dataset (images/, annotations.json, failures.json) whose caption
annotations carry provenance extras. Mixing interleaves original and
augmented samples into a shuffled, provenance-tagged training manifest.

Output layout under ``out_dir``::

    images/aug_{ordinal:06d}.png
    annotations.json   augmented dataset, COCO format
    manifest.json      MixManifest
    failures.json      per-job generation failures (empty list when none)
"""

from __future__ import annotations

import json
import logging
import math
import os
import random
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .augment import AugmentationConfig, AugmentedCaption, ChoiceSource, StrategyKind, augment_caption
from .coco import (
    CaptionAnnotation,
    Category,
    Dataset,
    ImageRecord,
    LabelAnnotation,
    labels_for_image,
    validate,
    write_dataset,
)
from .embeddings import EmbeddingTable
from .generation import BackendConfig, GenerationRequest, batch_generate
from .hashing import MASK64, fnv1a64

logger = logging.getLogger(__name__)


class BuilderError(Exception):
    pass


class NoCaptionsForImage(BuilderError):
    def __init__(self, image_id: int):
        self.image_id = image_id
        super().__init__(f"image {image_id} has no captions to augment")


class OutputNotWritable(BuilderError):
    pass


class AllJobsFailed(BuilderError):
    pass


class RatioUnsatisfiable(BuilderError):
    pass


@dataclass(frozen=True)
class GenerationJob:
    augmented: AugmentedCaption
    request: GenerationRequest
    output_file: str  # relative to out_dir


def plan_augmentation(
    dataset: Dataset,
    cfg: AugmentationConfig,
    ratio: float,
    run_seed: int,
    table: EmbeddingTable,
    *,
    image_width: int = 512,
    image_height: int = 512,
) -> list[GenerationJob]:
    """Plan exactly ``floor(ratio * n_images)`` generation jobs.

    Images are cycled in ascending id order; each visit draws one of the
    image's captions uniformly from the image's choice stream and augments
    it with the caption's own stream (a caption revisited at higher ratios
    continues its stream, so repeats differ). Images without captions are
    skipped with a warning and the plan backfills from the next image.
    """
    if ratio < 0:
        raise ValueError("ratio must be nonnegative")
    target = math.floor(ratio * len(dataset.images))
    if target == 0:
        return []

    captions_by_image: dict[int, list[CaptionAnnotation]] = defaultdict(list)
    for cap in dataset.captions:
        captions_by_image[cap.image_id].append(cap)  # dataset order is ascending id

    image_streams: dict[int, ChoiceSource] = {}
    caption_streams: dict[int, ChoiceSource] = {}
    label_sets = {img.id: labels_for_image(dataset, img.id) for img in dataset.images}

    jobs: list[GenerationJob] = []
    warned: set[int] = set()
    while len(jobs) < target:
        planned_before = len(jobs)
        for image in dataset.images:
            if len(jobs) == target:
                break
            caps = captions_by_image.get(image.id)
            if not caps:
                if image.id not in warned:
                    logger.warning("image %d has no captions; skipping", image.id)
                    warned.add(image.id)
                continue
            stream = image_streams.setdefault(
                image.id, ChoiceSource.derived(run_seed, f"image:{image.id}")
            )
            cap = caps[stream.index(len(caps))]
            choices = caption_streams.setdefault(
                cap.id, ChoiceSource.for_caption(run_seed, cap.id)
            )
            augmented = augment_caption(
                cap, label_sets[image.id], dataset.taxonomy, table, cfg, choices
            )
            ordinal = len(jobs)
            request = GenerationRequest(
                prompt=augmented.text,
                seed=fnv1a64(f"{ordinal}:{run_seed}".encode("utf-8")),
                width=image_width,
                height=image_height,
            )
            jobs.append(
                GenerationJob(
                    augmented=augmented,
                    request=request,
                    output_file=f"images/aug_{ordinal:06d}.png",
                )
            )
        if len(jobs) == planned_before:
            # a full cycle produced nothing: no image has captions
            raise NoCaptionsForImage(dataset.images[0].id if dataset.images else 0)
    return jobs


PROVENANCE_STRATEGY_KEY = "strategy"
PROVENANCE_SOURCE_KEY = "source_caption_id"


def _provenance_extra(augmented: AugmentedCaption) -> tuple[tuple[str, str], ...]:
    fields = {
        PROVENANCE_STRATEGY_KEY: augmented.strategy.value,
        PROVENANCE_SOURCE_KEY: augmented.source_caption_id,
        "replacements": [r.to_dict() for r in augmented.replacements],
    }
    return tuple((k, json.dumps(fields[k], sort_keys=True)) for k in sorted(fields))


def build_augmented_dataset(
    jobs: Sequence[GenerationJob],
    backend_cfg: BackendConfig,
    out_dir: str | os.PathLike,
    taxonomy: Sequence[Category],
    base_image_id: int,
) -> Dataset:
    """Generate every planned image and write the augmented COCO dataset.

    New image ids start above ``base_image_id`` (the highest original image
    id) at ``base_image_id + ordinal + 1``, so original and augmented id
    ranges never collide. Jobs that fail after retries are recorded in
    failures.json and excluded; the build only errors out when every job
    failed.
    """
    out = Path(out_dir)
    try:
        (out / "images").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputNotWritable(f"cannot create {out / 'images'}: {exc}") from exc

    results = batch_generate(backend_cfg, [job.request for job in jobs])

    images: list[ImageRecord] = []
    captions: list[CaptionAnnotation] = []
    labels: list[LabelAnnotation] = []
    failures: list[dict] = []
    next_caption_id = 1
    next_label_id = 1
    for ordinal, (job, result) in enumerate(zip(jobs, results)):
        if isinstance(result, Exception):
            failures.append(
                {
                    "ordinal": ordinal,
                    "output_file": job.output_file,
                    "prompt": job.request.prompt,
                    "error": type(result).__name__,
                    "message": str(result),
                }
            )
            continue
        path = out / job.output_file
        path.write_bytes(result.image)
        image_id = base_image_id + ordinal + 1
        images.append(
            ImageRecord(
                id=image_id,
                file_name=job.output_file,
                width=job.request.width,
                height=job.request.height,
            )
        )
        captions.append(
            CaptionAnnotation(
                id=next_caption_id,
                image_id=image_id,
                caption=job.augmented.text,
                extra=_provenance_extra(job.augmented),
            )
        )
        next_caption_id += 1
        for category_id in sorted(job.augmented.labels_after):
            labels.append(LabelAnnotation(next_label_id, image_id, category_id))
            next_label_id += 1

    (out / "failures.json").write_text(json.dumps(failures, indent=2) + "\n", "utf-8")
    if jobs and not images:
        raise AllJobsFailed(f"all {len(jobs)} generation jobs failed; see failures.json")

    dataset = Dataset(
        images=tuple(images),
        captions=tuple(captions),
        labels=tuple(labels),
        taxonomy=tuple(sorted(taxonomy, key=lambda c: c.id)),
    )
    report = validate(dataset)
    if not report.ok():
        raise BuilderError(f"built dataset failed validation: {report.violations[:3]}")
    (out / "annotations.json").write_bytes(write_dataset(dataset))
    return dataset


@dataclass(frozen=True)
class ManifestEntry:
    image_file: str
    labels: frozenset[int]
    source: str  # "original" | "augmented"
    strategy: Optional[StrategyKind] = None
    source_caption_id: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "image_file": self.image_file,
            "labels": sorted(self.labels),
            "source": self.source,
            "strategy": self.strategy.value if self.strategy else None,
            "source_caption_id": self.source_caption_id,
        }


@dataclass(frozen=True)
class MixManifest:
    entries: tuple[ManifestEntry, ...]
    ratio: float
    run_seed: int

    def to_json(self) -> str:
        doc = {
            "ratio": self.ratio,
            "run_seed": self.run_seed,
            "entries": [entry.to_dict() for entry in self.entries],
        }
        return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MixManifest":
        doc = json.loads(text)
        entries = tuple(
            ManifestEntry(
                image_file=e["image_file"],
                labels=frozenset(e["labels"]),
                source=e["source"],
                strategy=StrategyKind(e["strategy"]) if e.get("strategy") else None,
                source_caption_id=e.get("source_caption_id"),
            )
            for e in doc["entries"]
        )
        return cls(entries=entries, ratio=doc["ratio"], run_seed=doc["run_seed"])


def _augmented_provenance(augmented: Dataset) -> dict[int, tuple[Optional[StrategyKind], Optional[int]]]:
    # provenance travels as preserved extras on the augmented caption annotations
    out: dict[int, tuple[Optional[StrategyKind], Optional[int]]] = {}
    for cap in augmented.captions:
        if cap.image_id in out:
            continue
        fields = dict(cap.extra)
        strategy = None
        if PROVENANCE_STRATEGY_KEY in fields:
            strategy = StrategyKind(json.loads(fields[PROVENANCE_STRATEGY_KEY]))
        source_id = None
        if PROVENANCE_SOURCE_KEY in fields:
            source_id = json.loads(fields[PROVENANCE_SOURCE_KEY])
        out[cap.image_id] = (strategy, source_id)
    return out


def mix(
    original: Dataset,
    augmented: Dataset,
    ratio: float,
    run_seed: int,
    *,
    original_images_root: str = "",
) -> MixManifest:
    """Interleave original and augmented samples into a shuffled manifest.

    Takes the first ``floor(ratio * n_original_images)`` augmented images in
    ascending id order (a larger generation run can serve several ratios)
    and shuffles deterministically from ``run_seed``. ``original_images_root``
    is prepended to original file names so every entry resolves from the
    manifest's own directory.
    """
    if ratio < 0:
        raise ValueError("ratio must be nonnegative")
    need = math.floor(ratio * len(original.images))
    if len(augmented.images) < need:
        raise RatioUnsatisfiable(
            f"ratio {ratio} needs {need} augmented images, only {len(augmented.images)} available"
        )

    entries: list[ManifestEntry] = []
    for image in original.images:
        path = os.path.join(original_images_root, image.file_name) if original_images_root else image.file_name
        entries.append(
            ManifestEntry(
                image_file=path,
                labels=frozenset(c.id for c in labels_for_image(original, image.id)),
                source="original",
            )
        )
    provenance = _augmented_provenance(augmented)
    for image in augmented.images[:need]:
        strategy, source_caption_id = provenance.get(image.id, (None, None))
        entries.append(
            ManifestEntry(
                image_file=image.file_name,
                labels=frozenset(c.id for c in labels_for_image(augmented, image.id)),
                source="augmented",
                strategy=strategy,
                source_caption_id=source_caption_id,
            )
        )

    random.Random((run_seed ^ fnv1a64(b"mix")) & MASK64).shuffle(entries)
    return MixManifest(entries=tuple(entries), ratio=ratio, run_seed=run_seed)


def missing_manifest_files(manifest: MixManifest, base_dir: str | os.PathLike) -> list[str]:
    """Entries whose image files do not exist, resolved against ``base_dir``."""
    base = Path(base_dir)
    missing = []
    for entry in manifest.entries:
        path = Path(entry.image_file)
        if not path.is_absolute():
            path = base / path
        if not path.exists():
            missing.append(entry.image_file)
    return missing


@dataclass
class StatsReport:
    total_entries: int
    originals: int
    augmented: int
    by_strategy: dict[str, int]
    category_counts_original: dict[int, int]
    category_counts_mixed: dict[int, int]
    label_freq_original: dict[int, float]
    label_freq_mixed: dict[int, float]
    label_freq_delta: dict[int, float]

    def to_dict(self) -> dict:
        return {
            "total_entries": self.total_entries,
            "originals": self.originals,
            "augmented": self.augmented,
            "by_strategy": dict(self.by_strategy),
            "category_counts_original": {str(k): v for k, v in self.category_counts_original.items()},
            "category_counts_mixed": {str(k): v for k, v in self.category_counts_mixed.items()},
            "label_freq_original": {str(k): v for k, v in self.label_freq_original.items()},
            "label_freq_mixed": {str(k): v for k, v in self.label_freq_mixed.items()},
            "label_freq_delta": {str(k): v for k, v in self.label_freq_delta.items()},
        }


def stats(manifest: MixManifest) -> StatsReport:
    """Counts per source, per strategy, per category, plus frequency deltas.

    A category's frequency within a view is the fraction of that view's
    entries whose label set contains it; the delta is mixed minus
    original-only.
    """
    originals = [e for e in manifest.entries if e.source == "original"]
    augmented = [e for e in manifest.entries if e.source == "augmented"]
    by_strategy: dict[str, int] = defaultdict(int)
    for entry in augmented:
        if entry.strategy is not None:
            by_strategy[entry.strategy.value] += 1

    def counts(entries: Sequence[ManifestEntry]) -> dict[int, int]:
        out: dict[int, int] = defaultdict(int)
        for entry in entries:
            for category_id in entry.labels:
                out[category_id] += 1
        return dict(out)

    counts_original = counts(originals)
    counts_mixed = counts(manifest.entries)
    n_original = len(originals) or 1
    n_mixed = len(manifest.entries) or 1
    freq_original = {k: v / n_original for k, v in counts_original.items()}
    freq_mixed = {k: v / n_mixed for k, v in counts_mixed.items()}
    delta = {
        k: freq_mixed.get(k, 0.0) - freq_original.get(k, 0.0)
        for k in set(freq_original) | set(freq_mixed)
    }
    return StatsReport(
        total_entries=len(manifest.entries),
        originals=len(originals),
        augmented=len(augmented),
        by_strategy=dict(by_strategy),
        category_counts_original=counts_original,
        category_counts_mixed=counts_mixed,
        label_freq_original=freq_original,
        label_freq_mixed=freq_mixed,
        label_freq_delta=delta,
    )
