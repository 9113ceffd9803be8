"""Deterministic counter-based random streams.

Replicate ``r`` of an experiment always draws from the Philox stream keyed by
``SeedSequence([master_seed, r])``, so results do not depend on how replicates
are scheduled across threads.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

SEED_BITS = 64


@dataclass(frozen=True)
class RngSpec:
    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not (0 <= self.master_seed < 2**SEED_BITS):
            raise ValidationError("master_seed must be a 64-bit nonnegative integer")
        if self.stream_index < 0:
            raise ValidationError("stream_index must be nonnegative")

    def generator(self) -> np.random.Generator:
        return substream(self.master_seed, self.stream_index)

    def child(self, index: int) -> "RngSpec":
        """Spec for sub-stream ``index`` below this one (used for nested tasks)."""
        mixed = np.random.SeedSequence([self.master_seed, self.stream_index, index])
        return RngSpec(int(mixed.generate_state(1, np.uint64)[0]), 0)


def substream(master_seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(master_seed), int(index)])
    return np.random.Generator(np.random.Philox(ss))


def fresh_seed() -> int:
    """A random 63-bit seed, to be printed so the run can be reproduced."""
    return secrets.randbits(SEED_BITS - 1)


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an RngSpec, an int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngSpec):
        return rng.generator()
    if rng is None:
        return substream(fresh_seed(), 0)
    return substream(int(rng), 0)
