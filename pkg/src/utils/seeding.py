"""
Seed derivation for paired, worker-independent Monte-Carlo runs

Each deployment gets its own RNG stream derived from (master seed, K, f,
deployment index). Precoder and strategy never enter the derivation, so every
strategy in a (K, f) cell sees the same deployments and channels.
"""
import hashlib
from typing import Union

import numpy as np

SeedPart = Union[int, str]


def derive_seed(master_seed: int, *parts: SeedPart) -> int:
    """Derive a 64-bit seed from the master seed and a tuple of identifiers"""
    key = ":".join(str(part) for part in (master_seed, *parts))
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def deployment_rng(master_seed: int, K: int, f: int, index: int) -> np.random.Generator:
    """RNG stream for deployment `index` of cell (K, f)"""
    return np.random.default_rng(derive_seed(master_seed, K, f, index))


def array_digest(*arrays: np.ndarray) -> str:
    """Short hex digest over the raw bytes of a sequence of arrays"""
    h = hashlib.sha256()
    for arr in arrays:
        contiguous = np.ascontiguousarray(arr)
        h.update(str(contiguous.dtype).encode("ascii"))
        h.update(str(contiguous.shape).encode("ascii"))
        h.update(contiguous.tobytes())
    return h.hexdigest()[:16]
