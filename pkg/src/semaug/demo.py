"""Self-contained demo fixtures: a toy caption dataset and a vector table.

Real runs point the pipeline at a COCO-style annotation file and a
whitespace-separated word-vector file. Neither can be assumed present in an
offline checkout, so this module fabricates small stand-ins with the same
shapes:

* a dataset of flat-color PNGs whose captions mention their label words, and
* a 10,000-word, 50-dimensional vector table built from orthogonal cluster
  centers plus noise, so related words (woman/person, couch/sofa) score high
  while function words stay below the match threshold.

``python -m semaug.demo --out DIR`` writes the whole tree, including a
ready-to-run config for the CLI.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from PIL import Image

from .coco import (
    CaptionAnnotation,
    Dataset,
    ImageRecord,
    LabelAnnotation,
    load_coco_taxonomy,
    write_dataset,
)
from .hashing import fnv1a64

VECTOR_DIMENSION = 50
VECTOR_WORDS = 10_000
NOISE_SCALE = 0.05


def cluster_vocabulary() -> dict[str, list[str]]:
    """Word clusters for the synthetic table; one orthogonal center each.

    Every token of every taxonomy category name is covered so labels always
    embed. A token claimed by two clusters keeps its first assignment.
    """
    return {
        "person": [
            "person", "people", "woman", "man", "boy", "girl", "child",
            "lady", "guy", "kid", "crowd", "rider",
        ],
        "vehicle": [
            "bicycle", "car", "motorcycle", "airplane", "bus", "train",
            "truck", "boat", "van", "scooter", "tram", "ferry", "jet",
        ],
        "outdoor": [
            "traffic", "light", "fire", "hydrant", "stop", "sign",
            "parking", "meter", "bench",
        ],
        "animal": [
            "bird", "cat", "dog", "horse", "sheep", "cow", "elephant",
            "bear", "zebra", "giraffe", "puppy", "kitten", "pony", "lamb",
        ],
        "accessory": [
            "backpack", "umbrella", "handbag", "tie", "suitcase",
        ],
        "sports": [
            "frisbee", "skis", "snowboard", "sports", "ball", "kite",
            "baseball", "bat", "glove", "skateboard", "surfboard",
            "tennis", "racket",
        ],
        "kitchen": [
            "bottle", "wine", "glass", "cup", "fork", "knife", "spoon",
            "bowl",
        ],
        "food": [
            "banana", "apple", "sandwich", "orange", "broccoli", "carrot",
            "hot", "pizza", "donut", "cake", "burger", "pasta", "salad",
            "toast",
        ],
        "furniture": [
            "chair", "couch", "potted", "plant", "bed", "dining", "table",
            "toilet", "sofa", "stool", "desk", "armchair",
        ],
        "electronic": [
            "tv", "laptop", "mouse", "remote", "keyboard", "cell", "phone",
            "screen", "tablet",
        ],
        "appliance": [
            "microwave", "oven", "toaster", "sink", "refrigerator",
            "stove", "kettle",
        ],
        "indoor": [
            "book", "clock", "vase", "scissors", "teddy", "hair", "drier",
            "toothbrush", "lamp", "mirror",
        ],
        "verbs": [
            "sitting", "standing", "riding", "walking", "holding",
            "eating", "playing", "lying", "resting", "leaning", "waiting",
            "looking", "parked", "grazing",
        ],
        "adjectives": [
            "small", "large", "red", "blue", "green", "young", "old",
            "happy", "shiny", "wooden", "grainy", "cartoon", "black",
            "white",
        ],
        "scene": [
            "street", "park", "beach", "room", "field", "road", "grass",
            "snow", "city", "market", "mountains", "sea", "rainy",
            "foggy", "night", "day", "image", "photo",
        ],
        "function": [
            "a", "an", "the", "on", "in", "at", "of", "with", "and", "is",
            "are", "two", "three", "some", "near", "by", "over", "under",
            "next", "to",
        ],
    }


_SYLLABLES = ("ba", "re", "mo", "ti", "ku", "za", "lin", "vor", "pesh", "dra")


def _filler_words(count: int) -> list[str]:
    words = []
    i = 0
    while len(words) < count:
        n = len(_SYLLABLES)
        word = _SYLLABLES[i % n] + _SYLLABLES[(i // n) % n] + _SYLLABLES[(i // (n * n)) % n]
        word = f"{word}{i}"
        words.append(word)
        i += 1
    return words


def vector_table_lines(seed: int = 11) -> list[str]:
    """Exactly VECTOR_WORDS lines of ``word v1 .. v50``.

    Cluster centers come from the QR factorization of a random matrix, so
    they are exactly orthogonal; each member word is its center plus small
    noise, renormalized. Filler pseudo-words are plain random unit vectors
    and never appear in demo captions.
    """
    clusters = cluster_vocabulary()
    if len(clusters) > VECTOR_DIMENSION:
        raise ValueError("more clusters than dimensions; centers cannot be orthogonal")
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(VECTOR_DIMENSION, VECTOR_DIMENSION)))
    centers = {name: q[:, i] for i, name in enumerate(clusters)}

    vectors: dict[str, np.ndarray] = {}
    for name, words in clusters.items():
        for word in words:
            if word in vectors:
                continue
            vec = centers[name] + rng.normal(scale=NOISE_SCALE, size=VECTOR_DIMENSION)
            vectors[word] = vec / np.linalg.norm(vec)
    for word in _filler_words(VECTOR_WORDS - len(vectors)):
        vec = rng.normal(size=VECTOR_DIMENSION)
        vectors[word] = vec / np.linalg.norm(vec)

    lines = []
    for word, vec in vectors.items():
        lines.append(word + " " + " ".join(f"{v:.5f}" for v in vec))
    return lines


def write_vector_file(path: Union[str, Path], seed: int = 11) -> None:
    Path(path).write_text("\n".join(vector_table_lines(seed)) + "\n", "utf-8")


# single-token category names the demo labels images with; every
# supercategory here except person has same-supercategory peers
DEMO_LABEL_POOL = [
    "person", "dog", "cat", "horse", "bird", "car", "bus", "train",
    "bicycle", "truck", "pizza", "cake", "banana", "sandwich", "couch",
    "chair", "bed", "tv", "laptop", "keyboard", "bench", "bottle", "cup",
]

_TEMPLATES = (
    "A {adj} {a} {verb} {scene}.",
    "A {a} and a {b} {scene}.",
    "The {a} is {verb} {scene}.",
    "A photo of a {adj} {a} {scene}.",
    "A {a} {verb} near a {b}.",
)

_VERBS = ("sitting", "standing", "walking", "resting", "waiting", "parked")
_ADJS = ("small", "large", "red", "blue", "young", "old")
_SCENES = (
    "on the street", "in the park", "at the beach", "in the room",
    "on the grass", "in the city", "near the market", "in the field",
)


def build_demo_dataset(
    n_images: int = 20, captions_per_image: int = 2, seed: int = 7
) -> Dataset:
    """A small labeled dataset whose captions mention their label words."""
    taxonomy = load_coco_taxonomy()
    by_name = {c.name: c for c in taxonomy}
    pool = [by_name[name] for name in DEMO_LABEL_POOL]
    rng = np.random.default_rng(seed)

    images = []
    captions = []
    labels = []
    caption_id = 1
    label_id = 1
    for image_id in range(1, n_images + 1):
        images.append(
            ImageRecord(
                id=image_id,
                file_name=f"images/orig_{image_id:06d}.png",
                width=64,
                height=64,
            )
        )
        n_labels = int(rng.integers(1, 4))
        picked = list(rng.choice(len(pool), size=n_labels, replace=False))
        cats = [pool[i] for i in picked]
        for cat in cats:
            labels.append(LabelAnnotation(id=label_id, image_id=image_id, category_id=cat.id))
            label_id += 1
        for _ in range(captions_per_image):
            template = _TEMPLATES[int(rng.integers(len(_TEMPLATES)))]
            a = cats[int(rng.integers(len(cats)))].name
            b = cats[int(rng.integers(len(cats)))].name
            if "{b}" in template and len(cats) > 1:
                others = [c.name for c in cats if c.name != a] or [a]
                b = others[int(rng.integers(len(others)))]
            text = template.format(
                a=a,
                b=b,
                adj=_ADJS[int(rng.integers(len(_ADJS)))],
                verb=_VERBS[int(rng.integers(len(_VERBS)))],
                scene=_SCENES[int(rng.integers(len(_SCENES)))],
            )
            captions.append(CaptionAnnotation(id=caption_id, image_id=image_id, caption=text))
            caption_id += 1

    return Dataset(
        images=tuple(images),
        captions=tuple(captions),
        labels=tuple(labels),
        taxonomy=tuple(taxonomy),
    )


def _flat_png(color: tuple[int, int, int], width: int, height: int) -> bytes:
    image = Image.new("RGB", (width, height), color)
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return buf.getvalue()


def write_demo_tree(
    root: Path,
    *,
    n_images: int = 20,
    captions_per_image: int = 2,
    dataset_seed: int = 7,
    vector_seed: int = 11,
    run_seed: int = 42,
    ratio: float = 1.0,
) -> Dataset:
    """Write dataset, images, vectors, and a runnable CLI config under root."""
    root.mkdir(parents=True, exist_ok=True)
    dataset = build_demo_dataset(n_images, captions_per_image, dataset_seed)

    (root / "images").mkdir(exist_ok=True)
    for image in dataset.images:
        digest = fnv1a64(f"orig:{image.id}".encode("utf-8")).to_bytes(8, "big")
        color = (digest[0], digest[1], digest[2])
        (root / image.file_name).write_bytes(_flat_png(color, image.width, image.height))

    (root / "annotations.json").write_bytes(write_dataset(dataset))
    write_vector_file(root / "vectors.txt", vector_seed)

    config = {
        "dataset": "annotations.json",
        "embeddings": "vectors.txt",
        "images_root": ".",
        "out_dir": "out",
        "ratio": ratio,
        "seed": run_seed,
        "image_width": 64,
        "image_height": 64,
        "backend": {"kind": "mock"},
    }
    (root / "config.json").write_text(json.dumps(config, indent=2) + "\n", "utf-8")
    return dataset


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="semaug.demo", description="Generate demo fixtures for the pipeline."
    )
    parser.add_argument("--out", required=True, help="directory to write fixtures into")
    parser.add_argument("--images", type=int, default=20)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)
    root = Path(args.out)
    dataset = write_demo_tree(root, n_images=args.images, dataset_seed=args.seed)
    print(
        f"wrote {len(dataset.images)} images, {len(dataset.captions)} captions, "
        f"vectors and config to {root}"
    )
    print(f"try: semaug build --config {root / 'config.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
