"""Deterministic random streams.

Every run gets its own generator derived from ``(master_seed, run_index)``
through :class:`numpy.random.SeedSequence` spawn keys, so runs can be
executed in any order or in parallel with identical results. Inside a run
the initial point and the data use separate child streams; this keeps the
data stream identical when only the initialization changes.
"""

from __future__ import annotations

import numpy as np

__all__ = ["run_seed_sequence", "run_streams", "stream", "counter_generator"]


def run_seed_sequence(master_seed: int, run_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(run_index),))


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Generator keyed by an arbitrary integer path below ``master_seed``."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def run_streams(master_seed: int, run_index: int) -> tuple[np.random.Generator, np.random.Generator]:
    """(init_rng, data_rng) for one trajectory."""
    return stream(master_seed, run_index, 0), stream(master_seed, run_index, 1)


def counter_generator(seed: int, *counter: int) -> np.random.Generator:
    """Counter-based generator: Philox keyed by ``seed`` with the counter as key path.

    Used for tensor noise, where any slab of the tensor must be reproducible
    without generating the slabs before it.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(c) for c in counter))
    return np.random.Generator(np.random.Philox(ss))
