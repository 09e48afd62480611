"""Soft-target selection: which unrated items a student distills from.

Teacher-guided selection ranks a user's unrated items by the frozen
teacher once and reuses that ranking for the whole run.  Student-guided
selection re-ranks by the current student every time a selection is
refreshed, so items the student ranks high get sampled more often while
the soft targets themselves still come from the teacher.
"""

from __future__ import annotations

import numpy as np

from .losses import tempered_logistic
from .sampling import (
    RankedItems,
    rank_items,
    sample_exponential,
    sample_linear,
    sample_random,
    sample_top_k,
)


class SoftTargetSelector:
    """Per-user cached selection of distillation items and targets.

    A cached selection stays valid for the epoch it was drawn in, or for
    ``resample_period`` optimizer steps when that is set.  The teacher's
    scores over each user's unrated items are cached unconditionally
    (the teacher never moves); set ``cache_teacher_scores=False`` in the
    config to trade recompute time for memory on very large item sets.
    """

    def __init__(self, teacher, train, config):
        config.validate()
        self.teacher = teacher
        self.train = train
        self.config = config
        self._teacher_z = {}      # user -> teacher logits over all items
        self._teacher_ranked = {} # user -> RankedItems over unrated
        self._selection = {}      # user -> (epoch, step, items, q)

    def _teacher_logits(self, u):
        z = self._teacher_z.get(u)
        if z is None:
            pos = self.train.user_items(u)
            z = self.teacher.score_user(u, pos)
            if self.config.cache_teacher_scores:
                self._teacher_z[u] = z
        return z

    def _teacher_ranking(self, u, unrated):
        ranked = self._teacher_ranked.get(u)
        if ranked is None:
            z = self._teacher_logits(u)
            ranked = rank_items(unrated, z[unrated])
            self._teacher_ranked[u] = ranked
        return ranked

    def _student_ranking(self, u, unrated, student):
        pos = self.train.user_items(u)
        z = student.score_user(u, pos)
        return rank_items(unrated, z[unrated])

    def _draw(self, ranked, k, rng):
        cfg = self.config
        if cfg.sampling == "linear":
            return sample_linear(ranked, k, rng, max_passes=cfg.max_passes)
        if cfg.sampling == "exponential":
            return sample_exponential(ranked, k, cfg.gamma, rng,
                                      max_passes=cfg.max_passes)
        if cfg.sampling == "random":
            return sample_random(ranked.items, k, rng)
        return sample_top_k(ranked, min(k, ranked.items.size))

    def select(self, u, student, epoch, step, rng):
        """Items to distill on for user ``u`` plus their soft targets.

        Returns ``(items, q)`` where ``q`` are tempered teacher
        probabilities aligned with ``items``.  ``rng`` is only consumed
        when the cached selection has expired.
        """
        cfg = self.config
        cached = self._selection.get(u)
        if cached is not None:
            c_epoch, c_step, items, q = cached
            if cfg.resample_period is None:
                if c_epoch == epoch:
                    return items, q
            elif step - c_step < cfg.resample_period:
                return items, q
        unrated = self.train.unrated_items(u)
        if unrated.size == 0:
            empty = np.empty(0, dtype=np.int64)
            return empty, np.empty(0, dtype=np.float64)
        k = min(cfg.resolve_k(unrated.size, self.train.user_degree(u)),
                unrated.size)
        if cfg.tactic == "student":
            ranked = self._student_ranking(u, unrated, student)
        else:
            ranked = self._teacher_ranking(u, unrated)
        items = self._draw(ranked, k, rng)
        q = tempered_logistic(self._teacher_logits(u)[items], cfg.t1, cfg.t2)
        self._selection[u] = (epoch, step, items, q)
        return items, q

    def invalidate(self):
        """Drop cached selections (not the teacher score cache)."""
        self._selection.clear()
