"""Shared fixtures: one demo tree per session, parsed once."""

from pathlib import Path

import pytest

from semaug.coco import load_coco_taxonomy, parse_dataset
from semaug.demo import write_demo_tree
from semaug.embeddings import load_embeddings


@pytest.fixture(scope="session")
def demo_root(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("demo")
    write_demo_tree(root)
    return root


@pytest.fixture(scope="session")
def demo_dataset(demo_root):
    return parse_dataset((demo_root / "annotations.json").read_bytes())


@pytest.fixture(scope="session")
def table(demo_root):
    with (demo_root / "vectors.txt").open(encoding="utf-8") as fh:
        return load_embeddings(fh)


@pytest.fixture(scope="session")
def taxonomy():
    return load_coco_taxonomy()
