"""FNV-1a 64-bit hashing, used wherever the toolkit needs a stable fingerprint.

Seeds for per-caption random streams and for image generation requests are
derived from this hash so that runs are reproducible across processes and
platforms.
"""

FNV64_OFFSET_BASIS = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    """Return the FNV-1a 64-bit hash of ``data`` as an unsigned integer."""
    h = FNV64_OFFSET_BASIS
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & MASK64
    return h
