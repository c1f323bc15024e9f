"""Small shared helpers: stable hashing and seed derivation."""
from __future__ import annotations

import hashlib


def stable_digest(*parts: str | bytes) -> str:
    """sha256 hex digest of the concatenated parts, platform independent."""
    h = hashlib.sha256()
    for part in parts:
        data = part.encode("utf-8") if isinstance(part, str) else part
        h.update(len(data).to_bytes(8, "little"))
        h.update(data)
    return h.hexdigest()


def stable_seed(*parts: object) -> int:
    """Derive a 32-bit seed from arbitrary stringable parts."""
    digest = stable_digest(*(str(p) for p in parts))
    return int(digest[:8], 16)
