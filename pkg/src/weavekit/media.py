"""Shared modality/format vocabulary and canonical JSON helpers."""

from __future__ import annotations

import hashlib
import json

MODALITIES = ("text", "symbolic", "audio", "image", "report")
FORMATS = ("abc", "smf", "wav", "svg", "pdf", "json", "plain")

# Which formats each modality may legally carry.
LEGAL_PAIRS: dict[str, tuple[str, ...]] = {
    "text": ("plain",),
    "symbolic": ("abc", "smf"),
    "audio": ("wav",),
    "image": ("svg", "pdf"),
    "report": ("json",),
}

# Content types served by the artifact endpoint.
CONTENT_TYPES = {
    "abc": "text/plain; charset=utf-8",
    "smf": "audio/midi",
    "wav": "audio/wav",
    "svg": "image/svg+xml",
    "pdf": "application/pdf",
    "json": "application/json",
    "plain": "text/plain; charset=utf-8",
}

Pair = tuple[str, str]


def is_legal_pair(modality: str, fmt: str) -> bool:
    return fmt in LEGAL_PAIRS.get(modality, ())


def check_pair(modality: str, fmt: str) -> None:
    from .errors import ValidationError

    if modality not in MODALITIES:
        raise ValidationError(f"unknown modality {modality!r}")
    if fmt not in FORMATS:
        raise ValidationError(f"unknown format {fmt!r}")
    if not is_legal_pair(modality, fmt):
        raise ValidationError(f"illegal modality/format pair ({modality}, {fmt})")


def canonical_json(value) -> str:
    """Whitespace-free JSON with lexicographically sorted keys.

    Every digest and every wire fixture in the project goes through this,
    so two structurally equal values always serialize to identical bytes.
    """
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_of(value) -> str:
    """SHA-256 over the canonical JSON form of a value."""
    return sha256_hex(canonical_json(value).encode("utf-8"))
