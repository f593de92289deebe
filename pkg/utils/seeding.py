"""
Derived random streams.

Every independent unit of work (a sweep point, a protocol shard, a
resampling replicate) gets its own generator keyed by integers, so the
result never depends on the order in which units are scheduled.
"""

import numpy as np

from .errors import DomainError

# Stream tags keep different consumers of the same seed apart
SWEEP_STREAM = 1
PROTOCOL_STREAM = 2
MONTE_CARLO_STREAM = 3
BOOTSTRAP_STREAM = 4


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator for the stream identified by (seed, *keys)"""
    if seed < 0:
        raise DomainError(f"seed must be non-negative, got {seed}")
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(sequence)

