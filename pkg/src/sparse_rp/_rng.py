"""Seed derivation.

Every random draw in the toolkit comes from a ``numpy.random.Generator``
built on a ``SeedSequence`` whose ``spawn_key`` names the purpose of the
stream. Two draws with different keys are statistically independent, and
adding a new consumer never shifts the values an existing one sees.

Key layout (first element of the spawn key):

====  =========================================================
0     projection matrices (run, ensemble, vote[, k index])
1     synthetic data (run)
2     train/test split and class-pair choice (run)
3     SVM coordinate order (run, ensemble, k index, vote)
4     Monte Carlo chunks (chunk, sub-stream)
5     JL test vectors (draw)
====  =========================================================
"""

from __future__ import annotations

import numpy as np

MATRIX = 0
DATA = 1
SPLIT = 2
SVM = 3
MONTE_CARLO = 4
JL_VECTORS = 5


def generator(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def derive_seed(seed: int, *key: int) -> int:
    """Collapse ``(seed, key)`` into a fresh 64-bit seed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
