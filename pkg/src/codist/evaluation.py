"""Leave-one-out ranking metrics and per-user inference latency.

``evaluate`` ranks each user's held-out item among every item outside
that user's training positives with an O(num_items) counting pass;
``oracle_evaluate`` re-derives the same rank by materializing and
sorting the full candidate list.  The two must agree exactly, so the
oracle exists to cross-check the fast path in tests.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


class EvaluationError(Exception):
    pass


@dataclass
class EvalReport:
    n_cutoff: int
    hr: float
    ndcg: float
    ranks: np.ndarray          # per evaluated user, aligned with users
    users: np.ndarray
    skipped: int
    model_param_count: int
    latency: dict | None = field(default=None)  # filled by bench, not evaluate

    def to_dict(self):
        return {
            "n_cutoff": self.n_cutoff,
            "hr": self.hr,
            "ndcg": self.ndcg,
            "ranks": [int(r) for r in self.ranks],
            "users": [int(u) for u in self.users],
            "skipped": self.skipped,
            "model_param_count": self.model_param_count,
            "latency": self.latency,
        }

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            d = json.load(fh)
        return cls(n_cutoff=d["n_cutoff"], hr=d["hr"], ndcg=d["ndcg"],
                   ranks=np.asarray(d["ranks"], dtype=np.int64),
                   users=np.asarray(d["users"], dtype=np.int64),
                   skipped=d["skipped"],
                   model_param_count=d["model_param_count"],
                   latency=d.get("latency"))


def _metrics_from_ranks(ranks, n):
    ranks = np.asarray(ranks, dtype=np.int64)
    if ranks.size == 0:
        return 0.0, 0.0
    hit = ranks <= n
    hr = float(hit.mean())
    ndcg = float(np.where(hit, 1.0 / np.log2(ranks + 1.0), 0.0).mean())
    return hr, ndcg


def evaluate(model, split, n=50):
    """Rank each held-out item among all non-positive items; average HR/NDCG.

    Rank counts strictly-better candidates plus earlier-index ties, the
    same ordering the samplers use, so rank 1 is the best.
    """
    ranks, users = [], []
    skipped = 0
    for u in range(split.train.num_users):
        t = int(split.test_items[u])
        if u >= model.num_users or t < 0 or t >= model.num_items:
            log.warning("user %d not scorable by this model; skipped", u)
            skipped += 1
            continue
        pos = split.train.user_items(u)
        mask = split.train.positives_mask(u)
        if mask[t]:
            raise EvaluationError(
                f"held-out item {t} of user {u} is still in the training positives")
        scores = model.score_user(u, pos)
        s_t = scores[t]
        cand = ~mask
        higher = int(np.count_nonzero(cand & (scores > s_t)))
        ties_before = int(np.count_nonzero(cand[:t] & (scores[:t] == s_t)))
        ranks.append(1 + higher + ties_before)
        users.append(u)
    hr, ndcg = _metrics_from_ranks(ranks, n)
    return EvalReport(n_cutoff=n, hr=hr, ndcg=ndcg,
                      ranks=np.asarray(ranks, dtype=np.int64),
                      users=np.asarray(users, dtype=np.int64),
                      skipped=skipped,
                      model_param_count=model.param_count())


def oracle_evaluate(model, split, n=50):
    """Brute-force twin of ``evaluate``: sort the whole candidate list."""
    ranks, users = [], []
    skipped = 0
    for u in range(split.train.num_users):
        t = int(split.test_items[u])
        if u >= model.num_users or t < 0 or t >= model.num_items:
            skipped += 1
            continue
        pos = split.train.user_items(u)
        mask = split.train.positives_mask(u)
        if mask[t]:
            raise EvaluationError(
                f"held-out item {t} of user {u} is still in the training positives")
        cand = np.where(~mask)[0]
        scores = model.score_user(u, pos)[cand]
        order = np.lexsort((cand, -scores))
        rank = 1 + int(np.nonzero(cand[order] == t)[0][0])
        ranks.append(rank)
        users.append(u)
    hr, ndcg = _metrics_from_ranks(ranks, n)
    return EvalReport(n_cutoff=n, hr=hr, ndcg=ndcg,
                      ranks=np.asarray(ranks, dtype=np.int64),
                      users=np.asarray(users, dtype=np.int64),
                      skipped=skipped,
                      model_param_count=model.param_count())


def reports_equal(a, b):
    """Exact agreement on ranks and aggregates (oracle checks)."""
    return (a.n_cutoff == b.n_cutoff
            and np.array_equal(a.users, b.users)
            and np.array_equal(a.ranks, b.ranks)
            and a.hr == b.hr and a.ndcg == b.ndcg
            and a.skipped == b.skipped)


def bench_latency(model, train, users=None, repetitions=100, warmup=3):
    """Wall-clock stats for scoring all items for one user.

    Each repetition scores every user in ``users`` (default: all) and
    records one timing per user; the first ``warmup`` repetitions are
    discarded.  p95 is reported only when at least 20 samples remain.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if users is None:
        users = range(min(model.num_users, train.num_users))
    users = [int(u) for u in users]
    pos = {u: train.user_items(u) for u in users}
    samples = []
    for rep in range(warmup + repetitions):
        for u in users:
            t0 = time.perf_counter()
            model.score_user(u, pos[u])
            t1 = time.perf_counter()
            if rep >= warmup:
                samples.append(t1 - t0)
    arr = np.asarray(samples, dtype=np.float64)
    stats = {
        "mean": float(arr.mean()),
        "p50": float(np.percentile(arr, 50)),
        "p95": float(np.percentile(arr, 95)) if arr.size >= 20 else None,
        "samples": int(arr.size),
        "repetitions": repetitions,
        "warmup": warmup,
        "num_users": len(users),
        "param_count": model.param_count(),
    }
    return stats
