"""Reproducible randomness: Philox (counter-based) streams keyed by integer tuples.

``make_rng((seed, point, trial))`` gives an independent substream per trial,
so results do not depend on how trials are spread over workers.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (tuple, list)):
        entropy = [int(x) for x in seed]
    else:
        entropy = int(seed)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
