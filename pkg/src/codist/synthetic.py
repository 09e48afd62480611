"""Seeded synthetic dataset with block-structured preferences.

Users and items are split into matching clusters; each user interacts
mostly with items from their own cluster's block, with a small noise
fraction landing elsewhere.  The structure is low-rank by construction,
so a higher-dimensional model has measurable headroom over a tiny one,
which is what the end-to-end distillation checks need.
"""

from __future__ import annotations

import numpy as np

from .data import InteractionDataset, _build


def synthetic_blocks(num_users=200, num_items=100, num_clusters=4,
                     noise=0.05, min_interactions=15, max_interactions=25,
                     seed=0):
    """Deterministic block-preference interactions as a dataset.

    User u belongs to cluster u mod num_clusters; items are split into
    num_clusters contiguous blocks.  Each user draws a uniform number of
    distinct items, each taken from the home block with probability
    1 - noise and from the remaining items otherwise.  Timestamps are a
    random permutation of 1..n_u, so the held-out (latest) item is a
    uniform pick from the user's set.
    """
    if num_items % num_clusters != 0:
        raise ValueError("num_items must divide evenly into clusters")
    if not 0.0 <= noise < 1.0:
        raise ValueError("noise must be in [0, 1)")
    block = num_items // num_clusters
    if max_interactions > num_items or min_interactions < 2:
        raise ValueError("interaction bounds out of range")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x5b10c5)))
    pairs = {}
    for u in range(num_users):
        c = u % num_clusters
        home = np.arange(c * block, (c + 1) * block, dtype=np.int64)
        away = np.concatenate([np.arange(0, c * block, dtype=np.int64),
                               np.arange((c + 1) * block, num_items, dtype=np.int64)])
        n_u = int(rng.integers(min_interactions, max_interactions + 1))
        n_away = int(rng.binomial(n_u, noise))
        n_home = min(n_u - n_away, home.size)
        n_away = min(n_u - n_home, away.size)
        chosen = np.concatenate([
            rng.choice(home, size=n_home, replace=False),
            rng.choice(away, size=n_away, replace=False),
        ])
        times = rng.permutation(chosen.size) + 1
        for i, t in zip(chosen, times):
            pairs[(u, int(i))] = int(t)
    user_ids = [f"u{u}" for u in range(num_users)]
    item_ids = [f"i{i}" for i in range(num_items)]
    return _build(pairs, user_ids, item_ids)
