"""Deterministic seed splitting.

A subtask seed is the first 8 bytes (big-endian) of
``sha256(f"{master_seed}/{task_path}")``, where ``task_path`` joins its parts
with ``/``.  Seeds therefore depend only on the master seed and the task's
name, never on the order in which tasks run.
"""

import hashlib

import numpy as np


def derive_seed(master_seed: int, *path) -> int:
    key = "/".join([str(int(master_seed))] + [str(p) for p in path])
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big")


def derive_rng(master_seed: int, *path) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *path))
