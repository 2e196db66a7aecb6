"""Deterministic seed derivation shared across the training stack."""

from __future__ import annotations

import hashlib


def mix_seed(*parts) -> int:
    """Stable 63-bit seed from any printable parts; identical across runs
    and machines (unlike the builtin hash)."""
    text = "/".join(str(p) for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1
