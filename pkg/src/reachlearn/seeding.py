"""Named, independent random streams derived from one root seed.

Each stream is a PCG64 generator seeded by ``SeedSequence(root, spawn_key)``
where the spawn key starts with the CRC32 of the stream name, so adding a
new stream never perturbs existing ones.
"""
from __future__ import annotations

import zlib

import numpy as np

STREAMS = ("goals", "transforms", "walk-actions", "cem-noise", "weight-init",
           "corpus", "test-block", "eval-walks", "baseline")


def stream(root_seed: int, name: str, *extra: int) -> np.random.Generator:
    key = (zlib.crc32(name.encode("utf-8")),) + tuple(int(e) for e in extra)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(root_seed), spawn_key=key)))
