"""Stable 64-bit seed derivation."""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# stream tags, kept stable so recorded seeds stay reproducible
STREAM_WALK = 1
STREAM_ODNEAT = 2


def derive_seed(*parts: int) -> int:
    """Mix integers into one 64-bit seed via numpy's SeedSequence hash."""
    entropy = [int(p) & MASK64 for p in parts]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])
