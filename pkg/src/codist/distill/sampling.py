"""Probabilistic rank-aware sampling over a user's unrated items.

Items are ranked by descending score (ties broken by ascending item
index); rank r has importance pi = r/n. The linear scheme accepts rank r
against a uniformly drawn competitor rank (probability (n-r)/n, so
inclusion weights are proportional to 1 - pi and the bottom rank is never
sampled); the exponential scheme accepts with exp(-gamma*(r-1)/n), i.e.
proportional to exp(-gamma*pi) with the top rank always accepted. Both
are rejection samplers that repeat passes over the ranked list until K
unique items are collected or ``max_passes`` is exhausted.

All random draws are pre-generated per pass with a numpy Generator and
consumed by the kernel backend, so compiled and fallback backends yield
identical samples.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .. import _core

log = logging.getLogger(__name__)


@dataclass
class RankedItems:
    """Items sorted by descending score; rank of items[k] is k+1."""

    items: np.ndarray    # int64 item ids in rank order
    scores: np.ndarray   # float64 aligned scores

    def __len__(self):
        return int(self.items.shape[0])

    def rank_of(self, item):
        pos = np.flatnonzero(self.items == item)
        if pos.shape[0] == 0:
            raise KeyError(item)
        return int(pos[0]) + 1

    def importance(self):
        """pi(i) = rank(i)/n for each item in rank order."""
        n = len(self)
        return np.arange(1, n + 1, dtype=np.float64) / n


def rank_items(item_ids, scores):
    """Stable descending sort: higher score first, ties by ascending id."""
    item_ids = np.asarray(item_ids, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    order = np.lexsort((item_ids, -scores))
    return RankedItems(items=item_ids[order], scores=scores[order])


def rank_unrated(model, u, dataset):
    """Rank all items the user has not rated, by model score."""
    unrated = dataset.unrated_items(u)
    ctx = model.begin_user(u, dataset.user_items(u))
    return rank_items(unrated, ctx.score(unrated))


def linear_weights(n):
    """Normalized single-draw inclusion weights of the linear scheme."""
    w = (n - np.arange(1, n + 1, dtype=np.float64)) / n
    return w / w.sum()


def exponential_weights(n, gamma):
    """Normalized inclusion weights of the exponential scheme."""
    w = np.exp(-gamma * np.arange(1, n + 1, dtype=np.float64) / n)
    return w / w.sum()


def sample_linear(ranked, k, rng, max_passes=10):
    """Rank-aware linear rejection sampling; may return fewer than k."""
    return _rejection_sample(ranked, k, rng, max_passes, scheme="linear")


def sample_exponential(ranked, k, gamma, rng, max_passes=10):
    """Rank-aware exponential rejection sampling with slope gamma > 0."""
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    return _rejection_sample(ranked, k, rng, max_passes, scheme="exponential",
                             gamma=gamma)


def _rejection_sample(ranked, k, rng, max_passes, scheme, gamma=None):
    if k < 1:
        raise ValueError("sample size must be >= 1")
    n = len(ranked)
    k_eff = min(k, n)
    taken = np.zeros(n, dtype=np.uint8)
    sel = np.empty(k_eff, dtype=np.int64)
    count = 0
    for _ in range(max_passes):
        if scheme == "linear":
            comp = rng.integers(1, n + 1, size=n).astype(np.int64)
            count = _core.linear_pass(comp, taken, sel, count, k_eff)
        else:
            u = rng.random(n)
            count = _core.exp_pass(u, gamma, taken, sel, count, k_eff)
        if count == k_eff:
            break
    if count < k_eff:
        log.warning("rank-aware %s sampling returned %d of %d requested items "
                    "after %d passes (n=%d)", scheme, count, k_eff, max_passes, n)
    return ranked.items[sel[:count]]


def sample_random(item_pool, k, rng):
    """Uniform sampling without replacement; k > n returns the full pool."""
    if k < 1:
        raise ValueError("sample size must be >= 1")
    pool = np.asarray(item_pool, dtype=np.int64)
    if k >= pool.shape[0]:
        return pool.copy()
    return rng.choice(pool, size=k, replace=False)


def sample_top_k(ranked, k):
    """Deterministic top-K of the ranking; errors when K exceeds the pool."""
    if k < 1:
        raise ValueError("sample size must be >= 1")
    if k > len(ranked):
        raise ValueError(f"top-k size {k} exceeds unrated pool {len(ranked)}")
    return ranked.items[:k].copy()


def acceptance_frequencies(n, num_accepted, rng, scheme="linear", gamma=None):
    """Monte-Carlo acceptance tally for the rejection schemes.

    Runs full passes (no dedup, no early stop) through the same kernel
    acceptance logic as the samplers until at least ``num_accepted``
    events are recorded; returns per-rank counts.
    """
    counts = np.zeros(n, dtype=np.int64)
    total = 0
    while total < num_accepted:
        if scheme == "linear":
            comp = rng.integers(1, n + 1, size=n).astype(np.int64)
            total += _core.tally_linear_pass(comp, counts)
        else:
            u = rng.random(n)
            total += _core.tally_exp_pass(u, gamma, counts)
    return counts
