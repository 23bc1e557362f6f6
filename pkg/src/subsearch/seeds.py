"""Deterministic, platform-independent seed derivation."""

from __future__ import annotations

import hashlib


def derive_seed(master_seed: int, index: int) -> int:
    """Stable 63-bit per-instance seed from a master seed and an index.

    sha256-based so results do not depend on Python's hash randomization or
    platform word size; extending a run keeps earlier instances' seeds.
    """
    digest = hashlib.sha256(f"{master_seed}:{index}".encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big") >> 1
