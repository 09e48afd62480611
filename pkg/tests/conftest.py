import numpy as np
import pytest

from codist.data import InteractionDataset, SplitDataset, _build


def build_dataset(pair_times, num_users=None, num_items=None):
    """Dataset from {(u, i): t}; ids are synthesized."""
    m = num_users if num_users is not None else 1 + max(u for u, _ in pair_times)
    n = num_items if num_items is not None else 1 + max(i for _, i in pair_times)
    return _build(dict(pair_times),
                  [f"u{u}" for u in range(m)], [f"i{i}" for i in range(n)])


def random_dataset(rng, num_users, num_items, min_pos=2, max_pos=None):
    """Random interactions with distinct timestamps, >= min_pos per user."""
    if max_pos is None:
        max_pos = max(min_pos + 1, num_items // 2)
    pairs = {}
    for u in range(num_users):
        k = int(rng.integers(min_pos, max_pos + 1))
        items = rng.choice(num_items, size=k, replace=False)
        times = rng.permutation(k) + 1
        for i, t in zip(items, times):
            pairs[(u, int(i))] = int(t)
    return build_dataset(pairs, num_users, num_items)


def random_split(rng, num_users, num_items, **kw):
    from codist.data import leave_one_out_split
    return leave_one_out_split(random_dataset(rng, num_users, num_items, **kw))


@pytest.fixture
def tiny_ds():
    # 3 users, 4 items; user 0 rated {0,1}, user 1 {1,2,3}, user 2 {0,3}
    return build_dataset({(0, 0): 1, (0, 1): 2,
                          (1, 1): 3, (1, 2): 1, (1, 3): 2,
                          (2, 0): 2, (2, 3): 1})
