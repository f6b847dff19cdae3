"""COCO-format annotation model: parsing, validation, canonical serialization.

Handles caption-style annotation documents (``captions_*.json``),
instance-style documents (``instances_*.json``), and documents that merge
both annotation shapes into a single ``annotations`` array. Unknown JSON
fields (``info``, ``licenses``, per-record extras like ``flickr_url``) are
preserved opaquely and re-emitted on write, so real COCO files survive a
parse/write round-trip losslessly.

Only captions, category labels, and the category taxonomy are interpreted.
Segmentation masks, bounding boxes, and keypoints pass through as opaque
extras.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Iterable, Sequence


class CocoError(Exception):
    """Base class for annotation-format errors."""


class MalformedJson(CocoError):
    pass


class MissingField(CocoError):
    def __init__(self, name: str, where: str = ""):
        self.name = name
        super().__init__(f"missing field {name!r}" + (f" in {where}" if where else ""))


class DuplicateId(CocoError):
    def __init__(self, kind: str, id: int):
        self.kind = kind
        self.id = id
        super().__init__(f"duplicate {kind} id: {id}")


class DanglingReference(CocoError):
    def __init__(self, kind: str, id: int, message: str = ""):
        self.kind = kind
        self.id = id
        super().__init__(message or f"{kind} {id} references a missing record")


class InvalidValue(CocoError):
    """A record field breaks a type invariant (e.g. width < 1, empty caption)."""

    def __init__(self, kind: str, id: int, message: str):
        self.kind = kind
        self.id = id
        super().__init__(f"{kind} {id}: {message}")


class UnknownImage(CocoError):
    pass


class UnknownCategory(CocoError):
    pass


ExtraFields = tuple[tuple[str, str], ...]


def _pack_extra(raw: dict, known: Iterable[str]) -> ExtraFields:
    # Unknown fields are kept as canonical JSON strings so records stay
    # hashable and comparisons/round-trips are exact at the JSON level.
    known = set(known)
    return tuple(
        (k, json.dumps(raw[k], sort_keys=True, ensure_ascii=False))
        for k in sorted(raw)
        if k not in known
    )


def _unpack_extra(extra: ExtraFields) -> dict:
    return {k: json.loads(v) for k, v in extra}


@dataclass(frozen=True)
class Category:
    id: int
    name: str
    supercategory: str
    extra: ExtraFields = ()


@dataclass(frozen=True)
class ImageRecord:
    id: int
    file_name: str
    width: int
    height: int
    extra: ExtraFields = ()


@dataclass(frozen=True)
class CaptionAnnotation:
    id: int
    image_id: int
    caption: str
    extra: ExtraFields = ()


@dataclass(frozen=True)
class LabelAnnotation:
    id: int
    image_id: int
    category_id: int
    extra: ExtraFields = ()


@dataclass(frozen=True)
class Dataset:
    """Immutable container for one annotation document.

    Records are kept sorted by ascending id (the canonical order), so two
    datasets with the same content compare equal regardless of the order
    they appeared in on disk.
    """

    images: tuple[ImageRecord, ...]
    captions: tuple[CaptionAnnotation, ...]
    labels: tuple[LabelAnnotation, ...]
    taxonomy: tuple[Category, ...]
    extra: ExtraFields = ()


@dataclass(frozen=True)
class Violation:
    code: str  # duplicate_id | dangling_reference | invalid_value
    kind: str  # image | caption | label | category
    id: int
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    def ok(self) -> bool:
        return not self.violations

    def __len__(self) -> int:
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)


_IMAGE_FIELDS = ("id", "file_name", "width", "height")
_CAPTION_FIELDS = ("id", "image_id", "caption")
_LABEL_FIELDS = ("id", "image_id", "category_id")
_CATEGORY_FIELDS = ("id", "name", "supercategory")


def _require(raw: dict, name: str, where: str) -> Any:
    if name not in raw:
        raise MissingField(name, where)
    return raw[name]


def _as_int(value: Any, kind: str, name: str) -> int:
    # bool is an int subclass; reject it explicitly
    if isinstance(value, bool) or not isinstance(value, int):
        raise InvalidValue(kind, -1, f"field {name!r} must be an integer, got {value!r}")
    return value


def _as_str(value: Any, kind: str, name: str) -> str:
    if not isinstance(value, str):
        raise InvalidValue(kind, -1, f"field {name!r} must be a string, got {value!r}")
    return value


def parse_records(raw: bytes) -> Dataset:
    """Build a Dataset from COCO JSON without cross-record validation.

    Structural problems (bad JSON, missing fields, wrong field types) raise;
    invariant breaches such as duplicate ids or dangling references do not.
    Use :func:`validate` on the result, or :func:`parse_dataset` for the
    strict combination of both.
    """
    try:
        text = raw.decode("utf-8")
        doc = json.loads(text)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedJson(str(exc)) from exc
    if not isinstance(doc, dict):
        raise MalformedJson("top-level JSON value must be an object")
    if "images" not in doc:
        raise MissingField("images", "top-level document")
    if "annotations" not in doc:
        raise MissingField("annotations", "top-level document")

    images = []
    for entry in doc["images"]:
        where = "images"
        rec = ImageRecord(
            id=_as_int(_require(entry, "id", where), "image", "id"),
            file_name=_as_str(_require(entry, "file_name", where), "image", "file_name"),
            width=_as_int(_require(entry, "width", where), "image", "width"),
            height=_as_int(_require(entry, "height", where), "image", "height"),
            extra=_pack_extra(entry, _IMAGE_FIELDS),
        )
        images.append(rec)

    captions = []
    labels = []
    for entry in doc["annotations"]:
        where = "annotations"
        if "caption" in entry:
            captions.append(
                CaptionAnnotation(
                    id=_as_int(_require(entry, "id", where), "caption", "id"),
                    image_id=_as_int(_require(entry, "image_id", where), "caption", "image_id"),
                    caption=_as_str(entry["caption"], "caption", "caption"),
                    extra=_pack_extra(entry, _CAPTION_FIELDS),
                )
            )
        elif "category_id" in entry:
            labels.append(
                LabelAnnotation(
                    id=_as_int(_require(entry, "id", where), "label", "id"),
                    image_id=_as_int(_require(entry, "image_id", where), "label", "image_id"),
                    category_id=_as_int(entry["category_id"], "label", "category_id"),
                    extra=_pack_extra(entry, _LABEL_FIELDS),
                )
            )
        else:
            raise MissingField("caption|category_id", where)

    taxonomy = []
    for entry in doc.get("categories", []):
        where = "categories"
        taxonomy.append(
            Category(
                id=_as_int(_require(entry, "id", where), "category", "id"),
                name=_as_str(_require(entry, "name", where), "category", "name"),
                supercategory=_as_str(
                    _require(entry, "supercategory", where), "category", "supercategory"
                ),
                extra=_pack_extra(entry, _CATEGORY_FIELDS),
            )
        )

    return Dataset(
        images=tuple(sorted(images, key=lambda r: r.id)),
        captions=tuple(sorted(captions, key=lambda r: r.id)),
        labels=tuple(sorted(labels, key=lambda r: r.id)),
        taxonomy=tuple(sorted(taxonomy, key=lambda r: r.id)),
        extra=_pack_extra(doc, ("images", "annotations", "categories")),
    )


def parse_dataset(raw: bytes) -> Dataset:
    """Parse COCO annotation JSON and enforce every dataset invariant.

    Raises MalformedJson / MissingField for structural problems and
    DuplicateId / DanglingReference / InvalidValue for the first invariant
    violation found.
    """
    dataset = parse_records(raw)
    report = validate(dataset)
    if not report.ok():
        first = report.violations[0]
        if first.code == "duplicate_id":
            raise DuplicateId(first.kind, first.id)
        if first.code == "dangling_reference":
            raise DanglingReference(first.kind, first.id, first.message)
        raise InvalidValue(first.kind, first.id, first.message)
    return dataset


def _record_dict(rec, fields: Sequence[str]) -> dict:
    out = {name: getattr(rec, name) for name in fields}
    out.update(_unpack_extra(rec.extra))
    return out


def write_dataset(dataset: Dataset) -> bytes:
    """Serialize a valid Dataset to canonical COCO JSON (UTF-8, no BOM).

    Output is deterministic: records appear in ascending id order, captions
    before labels within the merged ``annotations`` array, known fields
    first within each record. Preserved unknown fields are re-emitted.
    """
    annotations = [_record_dict(c, _CAPTION_FIELDS) for c in dataset.captions]
    annotations += [_record_dict(l, _LABEL_FIELDS) for l in dataset.labels]
    doc = {
        "images": [_record_dict(i, _IMAGE_FIELDS) for i in dataset.images],
        "annotations": annotations,
        "categories": [_record_dict(c, _CATEGORY_FIELDS) for c in dataset.taxonomy],
    }
    doc.update(_unpack_extra(dataset.extra))
    return json.dumps(doc, indent=2, ensure_ascii=False).encode("utf-8")


def validate(dataset: Dataset) -> ValidationReport:
    """Check every invariant; one report entry per violation found."""
    report = ValidationReport()

    def bad(code: str, kind: str, id: int, message: str) -> None:
        report.violations.append(Violation(code, kind, id, message))

    def check_unique(kind: str, records) -> None:
        seen = set()
        for rec in records:
            if rec.id in seen:
                bad("duplicate_id", kind, rec.id, f"duplicate {kind} id {rec.id}")
            seen.add(rec.id)
            if rec.id < 1:
                bad("invalid_value", kind, rec.id, f"{kind} id must be positive")

    check_unique("image", dataset.images)
    check_unique("caption", dataset.captions)
    check_unique("label", dataset.labels)
    check_unique("category", dataset.taxonomy)

    image_ids = {img.id for img in dataset.images}
    category_ids = {cat.id for cat in dataset.taxonomy}

    for img in dataset.images:
        if img.width < 1 or img.height < 1:
            bad("invalid_value", "image", img.id,
                f"image dimensions must be >= 1, got {img.width}x{img.height}")

    names = set()
    for cat in dataset.taxonomy:
        if not cat.name:
            bad("invalid_value", "category", cat.id, "category name is empty")
        if not cat.supercategory:
            bad("invalid_value", "category", cat.id, "supercategory is empty")
        if cat.name in names:
            bad("invalid_value", "category", cat.id, f"duplicate category name {cat.name!r}")
        names.add(cat.name)

    for cap in dataset.captions:
        if not cap.caption.strip():
            bad("invalid_value", "caption", cap.id, "caption is empty")
        if cap.image_id not in image_ids:
            bad("dangling_reference", "caption", cap.id,
                f"caption {cap.id} references missing image {cap.image_id}")

    for lab in dataset.labels:
        if lab.image_id not in image_ids:
            bad("dangling_reference", "label", lab.id,
                f"label {lab.id} references missing image {lab.image_id}")
        if lab.category_id not in category_ids:
            bad("dangling_reference", "label", lab.id,
                f"label {lab.id} references missing category {lab.category_id}")

    return report


def labels_for_image(dataset: Dataset, image_id: int) -> set[Category]:
    """Categories referenced by the image's label annotations, deduplicated by id."""
    if image_id not in {img.id for img in dataset.images}:
        raise UnknownImage(f"no image with id {image_id}")
    by_id = {cat.id: cat for cat in dataset.taxonomy}
    found: dict[int, Category] = {}
    for lab in dataset.labels:
        if lab.image_id == image_id:
            found[lab.category_id] = by_id[lab.category_id]
    return set(found.values())


def supercategory_peers(taxonomy: Sequence[Category], category_id: int) -> list[Category]:
    """All categories sharing the supercategory, excluding the category itself.

    Returned in ascending id order.
    """
    by_id = {cat.id: cat for cat in taxonomy}
    if category_id not in by_id:
        raise UnknownCategory(f"no category with id {category_id}")
    group = by_id[category_id].supercategory
    peers = [c for c in taxonomy if c.supercategory == group and c.id != category_id]
    return sorted(peers, key=lambda c: c.id)


def load_coco_taxonomy() -> tuple[Category, ...]:
    """The standard 80-category COCO taxonomy shipped with the package."""
    text = resources.files("semaug.data").joinpath("coco_categories.json").read_text("utf-8")
    return tuple(
        Category(id=c["id"], name=c["name"], supercategory=c["supercategory"])
        for c in json.loads(text)
    )
