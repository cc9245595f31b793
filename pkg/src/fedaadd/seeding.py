"""Deterministic derivation of per-component RNG seeds.

Every randomized component of an experiment (dataset generation,
partitioning, per-client training, per-client poisoning) seeds its own
generator with a value derived from the master seed and a component tag.
Because derivation is hash based, adding a new component never perturbs the
streams of existing ones.
"""

from __future__ import annotations

import hashlib

_MASK_63 = (1 << 63) - 1


def derive_seed(base: int | str, *parts: int | str) -> int:
    """Return a 63-bit seed derived from ``base`` and the component tags.

    The derivation is ``sha256("base/part1/part2/...")`` truncated to the
    first 8 bytes, masked to 63 bits so it is valid for any RNG that expects
    a non-negative integer.
    """
    text = "/".join(str(p) for p in (base, *parts))
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & _MASK_63
