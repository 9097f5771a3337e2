"""Deterministic, process-independent derivation of per-task RNG seeds."""

from __future__ import annotations

import hashlib


def derive_seed(*parts: int | str) -> int:
    """Hash (ints/strings) into a 63-bit seed, stable across processes.

    Python's builtin hash() is salted per interpreter, so manifests written
    by one run would not regenerate under another; blake2b is not.
    """
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(b"\x1f")
        h.update(str(p).encode())
    return int.from_bytes(h.digest(), "little") >> 1
