from typing import Optional

import numpy as np

SEED_MASK = (1 << 64) - 1


def derive_seed(master: int, *keys: int) -> int:
    """Derive an independent 64-bit seed from a master seed and a tuple of integer keys.

    e.g. the seed of retry j of round i is `derive_seed(master, i, j)`.
    """
    sequence = np.random.SeedSequence(entropy=int(master) & SEED_MASK, spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    if keys:
        seed = derive_seed(seed, *keys)
    return np.random.default_rng(np.random.SeedSequence(int(seed) & SEED_MASK))


def entropy_seed() -> int:
    """A fresh 64-bit seed drawn from OS entropy, used when the caller did not fix one."""
    return int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0])


def resolve_seed(seed: Optional[int]) -> int:
    return entropy_seed() if seed is None else int(seed)
