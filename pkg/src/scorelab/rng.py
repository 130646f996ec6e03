"""Deterministic random-stream derivation.

All randomness in the package flows through counter-based Philox
generators keyed from (label, master seed).  Streams for different labels
or indices are independent, and nothing touches numpy's global state, so
results never depend on call order or thread count.
"""

import hashlib

import numpy as np

__all__ = ["component_seed", "stream", "substream"]


def component_seed(name: str, master_seed: int) -> int:
    """Stable 64-bit seed for a named component under a master seed."""
    digest = hashlib.sha256(f"{name}:{master_seed}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def stream(name: str, master_seed: int) -> np.random.Generator:
    """Independent generator for a named component."""
    return np.random.Generator(np.random.Philox(component_seed(name, master_seed)))


def substream(seed: int, index: int) -> np.random.Generator:
    """Generator keyed directly by (seed, index).

    Used for per-trajectory streams: the Philox key is the pair itself, so
    trajectory ``index`` under ``seed`` always produces the same draws no
    matter how work is scheduled.
    """
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, index & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
