"""Counter-based RNG stream derivation.

Every random quantity in the simulator is drawn from a stream identified by
``(master_seed, *keys)``. Keys may be ints or strings; strings are folded to
64-bit ints with BLAKE2b so the mapping is stable across processes and
platforms (unlike ``hash()``). A given key path always yields the same
``numpy.random.Generator`` regardless of the order in which streams are
requested, which keeps parallel sweeps order-independent.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def key_to_int(key: int | str) -> int:
    if isinstance(key, (bool, np.bool_)):
        return int(key)
    if isinstance(key, (int, np.integer)):
        return int(key) & _MASK64
    digest = hashlib.blake2b(str(key).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(master_seed: int, *keys: int | str) -> np.random.Generator:
    """Return the generator for ``(master_seed, *keys)``."""
    seq = np.random.SeedSequence(
        entropy=int(master_seed) & _MASK64,
        spawn_key=tuple(key_to_int(k) for k in keys),
    )
    return np.random.Generator(np.random.PCG64(seq))
