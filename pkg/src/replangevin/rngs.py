"""Seeding helpers.

All randomness in the package flows through numpy's PCG64 generator seeded via
SeedSequence.  Independent per-run streams are derived from a master seed and a
run key with SeedSequence spawn keys, so parallel experiments reproduce
bit-identically regardless of scheduling or worker count.
"""

from __future__ import annotations

import numpy as np


def master_rng(seed: int) -> np.random.Generator:
    """Generator for single-stream use (e.g. graph sampling)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def run_rng(master_seed: int, *run_key: int) -> np.random.Generator:
    """Independent stream for one run, keyed by integers (e.g. eps index, run index)."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(run_key))
    return np.random.Generator(np.random.PCG64(ss))
