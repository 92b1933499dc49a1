"""Reproducible, splittable random streams."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """A ``(base_seed, stream_index)`` pair naming one independent stream.

    Streams are derived through :class:`numpy.random.SeedSequence` spawn keys,
    so distinct indices give statistically independent generators and the
    same pair always reproduces the same sequence.
    """

    base_seed: int
    stream_index: int = 0
    path: tuple[int, ...] = ()

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(
            entropy=int(self.base_seed), spawn_key=(int(self.stream_index), *self.path)
        )

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))

    def child(self, index: int) -> "RngStream":
        """Deterministic sub-stream, e.g. one per replication or row block."""
        return RngStream(self.base_seed, self.stream_index, (*self.path, int(index)))

    def derived_seed(self) -> int:
        """A 63-bit integer summarising this stream (used for bookkeeping)."""
        return int(self.seed_sequence().generate_state(1, np.uint64)[0] >> np.uint64(1))


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream, a Generator, an int seed or None."""
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
