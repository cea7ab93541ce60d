"""
Hierarchical random streams.

Every stochastic operation draws from a generator keyed by the run seed and a path such as
`(sentence, group, beam, step, purpose)`.
The generator is a counter-based Philox seeded through `SeedSequence`, so a stream depends only on its key:
decoding sentences in a different order, or in parallel, cannot change any draw.
"""

from enum import IntEnum

import numpy as np


class Purpose(IntEnum):
    PERTURB = 0
    SAMPLE = 1


def stream(seed: int, *path: int) -> np.random.Generator:
    if seed < 0 or any(p < 0 for p in path):
        raise ValueError(f"stream keys must be non-negative, got {(seed, *path)}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *path])))


def step_stream(
    seed: int,
    sentence: int,
    group: int,
    beam: int,
    step: int,
    purpose: Purpose,
) -> np.random.Generator:
    return stream(seed, sentence, group, beam, step, int(purpose))
