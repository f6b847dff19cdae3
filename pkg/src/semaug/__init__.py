"""Semantic caption augmentation toolkit for COCO-style datasets.

Rewrites captions under four strategies (prefix, suffix, replacement,
compound), generates matching images through a text-to-image backend, and
mixes the result with the original dataset into a provenance-tagged
training manifest.
"""

__version__ = "0.1.0"
