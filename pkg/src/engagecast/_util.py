"""Shared plumbing: seed derivation, stable JSON, file hashing."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

_SEED_MOD = 2**32


def derive_seed(root_seed: int, *labels: object) -> int:
    """Derive a child seed from a root seed and a label path.

    Stable across runs and platforms, so parallel jobs keyed by label get
    order-independent randomness.
    """
    digest = hashlib.sha256(
        ("/".join([str(int(root_seed))] + [str(x) for x in labels])).encode("utf-8")
    ).digest()
    return int.from_bytes(digest[:4], "big") % _SEED_MOD


def stable_dumps(obj: Any) -> str:
    """Serialize to JSON deterministically (sorted keys, fixed separators)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(stable_dumps(obj) + "\n", encoding="utf-8")


def read_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
