"""Deterministic, splittable seed derivation for replica experiments.

Replica ``i`` of experiment ``name`` under master seed ``s`` uses the
first 8 bytes of ``sha256(f"{s}:{name}:{i}")`` as its own seed, so
parallel replicas are reproducible and order-independent.
"""

from __future__ import annotations

import hashlib


def derive_seed(master: int, name: str, index: int = 0) -> int:
    digest = hashlib.sha256(f"{master}:{name}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")
