"""Canonical JSON and the scenario config hash.

Every log line, wire message, and hash input goes through ``canonical_dumps``:
sorted keys, no whitespace, repr-shortest floats, NaN rejected. Replay
byte-identity depends on this being the only serialization path.
"""

from __future__ import annotations

import hashlib
import json


def canonical_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(payload) -> str:
    """64-bit hex digest of a canonical JSON payload."""
    data = canonical_dumps(payload).encode("utf-8")
    return hashlib.blake2b(data, digest_size=8).hexdigest()
