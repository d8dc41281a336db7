"""Shared helpers: seed derivation, canonical JSON, content hashing."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np


class ToolError(Exception):
    """Base class for data/usage errors that map to a nonzero CLI exit."""


def derive_seed(base: int, *branch: int | str) -> int:
    """Derive a child seed from a base seed and a branch path.

    Stable across processes and platforms, so every stage of a pipeline can
    record the plain integer that reproduces it.
    """
    words = [int(base) & 0xFFFFFFFF]
    for part in branch:
        if isinstance(part, str):
            digest = hashlib.sha256(part.encode("utf-8")).digest()
            words.append(int.from_bytes(digest[:4], "big"))
        else:
            words.append(int(part) & 0xFFFFFFFF)
    seq = np.random.SeedSequence(words)
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def canonical_json(obj) -> str:
    """Serialize deterministically: sorted keys, compact separators, UTF-8."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_text(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def read_json(path: str | Path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
