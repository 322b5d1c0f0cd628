"""Deterministic seed derivation.

All randomness flows from a single root seed. Sub-streams are derived by
hashing the root together with a path of component-name keys, so any episode,
sampler, or generator can be reseeded independently of execution order and
worker count.
"""

from __future__ import annotations

import hashlib

_MASK = (1 << 63) - 1


def derive_seed(root: int, *keys: object) -> int:
    """Derive a child seed from ``root`` and a path of component keys.

    The derivation is sha256 over the decimal root and the stringified keys,
    stable across platforms and Python versions.
    """
    h = hashlib.sha256()
    h.update(str(int(root)).encode("utf-8"))
    for key in keys:
        h.update(b"|")
        h.update(str(key).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big") & _MASK
