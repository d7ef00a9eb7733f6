"""Named sub-stream derivation so every random draw traces back to one seed."""
from __future__ import annotations

import zlib

import numpy as np


def _key(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if part < 0:
        raise ValueError(f"seed keys must be non-negative, got {part}")
    return int(part)


def derive_seed(master: int, *keys: int | str) -> int:
    """Return a 32-bit seed for the sub-stream ``master / keys[0] / keys[1] ...``."""
    seq = np.random.SeedSequence([_key(master), *(_key(k) for k in keys)])
    return int(seq.generate_state(1)[0])


def derive_rng(master: int, *keys: int | str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([_key(master), *(_key(k) for k in keys)]))
