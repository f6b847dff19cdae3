"""Text-to-image backend client: remote inference service or deterministic mock.

Wire protocol (remote): ``POST {endpoint}/generate`` with JSON body
``{"prompt", "seed", "width", "height", "steps", "guidance_scale"}``;
success is HTTP 200 with body ``{"image_base64": "<PNG>"}``. Any non-200 is
a server error. The SEMAUG_BACKEND_URL environment variable overrides the
configured endpoint.

The mock backend renders a 4-quadrant flat-color PNG whose colors are
derived from FNV-1a-64 of the prompt XOR the request seed, so identical
requests always produce identical bytes and different prompts are visibly
different.
"""

from __future__ import annotations

import base64
import io
import os
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import requests
from PIL import Image

from .hashing import MASK64, fnv1a64

ENDPOINT_ENV_VAR = "SEMAUG_BACKEND_URL"


class GenerationError(Exception):
    """Base class for generation failures."""


class Timeout(GenerationError):
    pass


class ServerError(GenerationError):
    def __init__(self, status: int, body_excerpt: str):
        self.status = status
        self.body_excerpt = body_excerpt
        super().__init__(f"backend returned HTTP {status}: {body_excerpt}")


class InvalidImage(GenerationError):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


class TransportFailed(GenerationError):
    """Retries exhausted; wraps the last underlying error."""

    def __init__(self, last_error: Exception):
        self.last_error = last_error
        super().__init__(f"retries exhausted; last error: {last_error}")


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    seed: int
    width: int = 512
    height: int = 512
    steps: int = 30
    guidance_scale: float = 7.5

    def __post_init__(self):
        if not self.prompt.strip():
            raise ValueError("prompt must be nonempty")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must fit in 64 unsigned bits")
        for name in ("width", "height"):
            value = getattr(self, name)
            if value < 1 or value % 8 != 0:
                raise ValueError(f"{name} must be a positive multiple of 8, got {value}")
        if self.steps < 1:
            raise ValueError("steps must be positive")
        if self.guidance_scale <= 0:
            raise ValueError("guidance_scale must be positive")

    def to_payload(self) -> dict:
        return {
            "prompt": self.prompt,
            "seed": self.seed,
            "width": self.width,
            "height": self.height,
            "steps": self.steps,
            "guidance_scale": self.guidance_scale,
        }


@dataclass(frozen=True)
class GenerationResult:
    image: bytes  # encoded PNG
    request_echo: GenerationRequest
    backend_id: str
    elapsed_ms: int


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"  # "mock" or "remote"
    endpoint: Optional[str] = None
    timeout_ms: int = 120_000
    max_in_flight: int = 4
    retries: int = 3
    backoff_base_ms: int = 500

    def __post_init__(self):
        if self.kind not in ("mock", "remote"):
            raise ValueError(f"backend kind must be 'mock' or 'remote', got {self.kind!r}")
        if self.kind == "remote" and not (self.endpoint or os.environ.get(ENDPOINT_ENV_VAR)):
            raise ValueError("remote backend requires an endpoint")
        if self.timeout_ms < 1 or self.max_in_flight < 1 or self.backoff_base_ms < 1:
            raise ValueError("timeout_ms, max_in_flight, backoff_base_ms must be positive")
        if self.retries < 0:
            raise ValueError("retries must be nonnegative")

    @classmethod
    def from_dict(cls, raw: dict) -> "BackendConfig":
        allowed = {
            "kind", "endpoint", "timeout_ms", "max_in_flight", "retries", "backoff_base_ms",
        }
        unknown = set(raw) - allowed
        if unknown:
            raise ValueError(f"unknown backend config keys: {sorted(unknown)}")
        return cls(**raw)


def quadrant_colors(prompt: str, seed: int) -> list[tuple[int, int, int]]:
    """The four mock RGB colors for a (prompt, seed) pair.

    ``h = fnv1a64(utf8(prompt)) XOR seed``; the big-endian bytes of ``h``
    repeated twice supply 12 of 16 bytes as RGB triples, quadrant k taking
    bytes 3k..3k+2. Quadrants are ordered top-left, top-right, bottom-left,
    bottom-right.
    """
    digest = ((fnv1a64(prompt.encode("utf-8")) ^ seed) & MASK64).to_bytes(8, "big") * 2
    return [tuple(digest[3 * k : 3 * k + 3]) for k in range(4)]


def mock_generate(request: GenerationRequest) -> GenerationResult:
    """Deterministic offline stand-in for the diffusion backend."""
    started = time.monotonic()
    colors = quadrant_colors(request.prompt, request.seed)
    w, h = request.width, request.height
    pixels = np.zeros((h, w, 3), dtype=np.uint8)
    half_w, half_h = w // 2, h // 2
    pixels[:half_h, :half_w] = colors[0]
    pixels[:half_h, half_w:] = colors[1]
    pixels[half_h:, :half_w] = colors[2]
    pixels[half_h:, half_w:] = colors[3]
    buf = io.BytesIO()
    Image.fromarray(pixels).save(buf, format="PNG")
    return GenerationResult(
        image=buf.getvalue(),
        request_echo=request,
        backend_id="mock",
        elapsed_ms=int((time.monotonic() - started) * 1000),
    )


def _decode_and_check(png_bytes: bytes, request: GenerationRequest) -> None:
    try:
        with Image.open(io.BytesIO(png_bytes)) as img:
            size = img.size
    except Exception as exc:
        raise InvalidImage(f"response is not a decodable image: {exc}") from exc
    if size != (request.width, request.height):
        raise InvalidImage(
            f"backend returned {size[0]}x{size[1]}, requested {request.width}x{request.height}"
        )


def generate(cfg: BackendConfig, request: GenerationRequest) -> GenerationResult:
    """Run one generation request with retry/backoff on transient failures.

    Timeouts, connection errors, and non-200 responses are retried with
    exponential backoff (base * 2^attempt); an undecodable or wrong-size
    image raises InvalidImage immediately. When retries are exhausted the
    last transient error is wrapped in TransportFailed.
    """
    if cfg.kind == "mock":
        return mock_generate(request)

    endpoint = os.environ.get(ENDPOINT_ENV_VAR) or cfg.endpoint
    url = endpoint.rstrip("/") + "/generate"
    started = time.monotonic()
    last_error: Exception = Timeout("request never attempted")
    for attempt in range(cfg.retries + 1):
        if attempt:
            time.sleep(cfg.backoff_base_ms * (2 ** (attempt - 1)) / 1000.0)
        try:
            response = requests.post(
                url, json=request.to_payload(), timeout=cfg.timeout_ms / 1000.0
            )
        except requests.Timeout:
            last_error = Timeout(f"no response from {url} within {cfg.timeout_ms} ms")
            continue
        except requests.RequestException as exc:
            last_error = exc
            continue
        if response.status_code != 200:
            last_error = ServerError(response.status_code, response.text[:200])
            continue
        try:
            png_bytes = base64.b64decode(response.json()["image_base64"])
        except Exception as exc:
            raise InvalidImage(f"malformed success response: {exc}") from exc
        _decode_and_check(png_bytes, request)
        return GenerationResult(
            image=png_bytes,
            request_echo=request,
            backend_id=endpoint,
            elapsed_ms=int((time.monotonic() - started) * 1000),
        )
    raise TransportFailed(last_error)


BatchSlot = Union[GenerationResult, GenerationError]


def batch_generate(cfg: BackendConfig, requests_: Sequence[GenerationRequest]) -> list[BatchSlot]:
    """Run many requests with at most ``cfg.max_in_flight`` outstanding.

    Results come back in input order regardless of completion order. A
    request that fails after retries occupies its slot as the error itself
    rather than aborting the batch.
    """
    slots: list[Optional[BatchSlot]] = [None] * len(requests_)
    if not requests_:
        return []
    with ThreadPoolExecutor(max_workers=cfg.max_in_flight) as pool:
        futures = {pool.submit(generate, cfg, req): i for i, req in enumerate(requests_)}
        for future in as_completed(futures):
            i = futures[future]
            try:
                slots[i] = future.result()
            except GenerationError as exc:
                slots[i] = exc
            except Exception as exc:  # defensive: keep batch isolation
                slots[i] = TransportFailed(exc)
    return slots  # type: ignore[return-value]
