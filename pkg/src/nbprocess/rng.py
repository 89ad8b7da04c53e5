"""Seeded, independently keyed random streams.

Every random draw in the package goes through a ``numpy.random.Generator``
built here. A stream is identified by ``(seed, stream_id)``; distinct ids are
spawned from the same ``SeedSequence`` entropy with different spawn keys, which
numpy guarantees to give independent PCG64 states.
"""
from __future__ import annotations

import numpy as np

# Named streams used by the pipeline. Chains use CHAIN_BASE + chain index.
STREAMS = {
    "split": 1,
    "simulate": 2,
    "dist-check": 3,
    "init": 4,
}
CHAIN_BASE = 100


def rng_stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Return the generator for ``(seed, stream_id)``.

    Same arguments always give a generator producing the same sequence.
    """
    if seed < 0 or stream_id < 0:
        raise ValueError("seed and stream_id must be nonnegative")
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.PCG64(ss))


def named_stream(seed: int, name: str) -> np.random.Generator:
    return rng_stream(seed, STREAMS[name])


def chain_stream(seed: int, chain: int) -> np.random.Generator:
    return rng_stream(seed, CHAIN_BASE + chain)


def get_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def set_state(rng: np.random.Generator, state: dict) -> None:
    rng.bit_generator.state = state
