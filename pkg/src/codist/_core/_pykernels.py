"""Numpy implementations of the hot kernels.

Mirrors ``_ckernels`` exactly: same signatures, same order of operations,
same RNG consumption (all random draws are generated by the caller and
passed in as arrays). Selected as a fallback when the compiled extension
is unavailable.
"""

from __future__ import annotations

import numpy as np


def linear_pass(comp_ranks, taken, sel, count, k):
    """One pass of rank-aware linear rejection sampling.

    Walks ranks 1..n in order; rank r is accepted when it beats the
    pre-drawn uniform competitor rank ``comp_ranks[r-1]`` (acceptance
    probability (n-r)/n). Accepted, not-yet-taken positions are appended
    to ``sel`` until ``k`` items are collected.

    Returns the updated count.
    """
    n = comp_ranks.shape[0]
    ranks = np.arange(1, n + 1, dtype=np.int64)
    accepted = np.flatnonzero((ranks < comp_ranks) & (taken == 0))
    room = k - count
    chosen = accepted[:room]
    taken[chosen] = 1
    sel[count:count + chosen.shape[0]] = chosen
    return count + chosen.shape[0]


def exp_pass(u_draws, gamma, taken, sel, count, k):
    """One pass of exponential rejection sampling.

    Rank r is accepted when ``u_draws[r-1] < exp(-gamma*(r-1)/n)``; the
    top rank is always accepted.
    """
    n = u_draws.shape[0]
    thresh = np.exp(-gamma * np.arange(n, dtype=np.float64) / n)
    accepted = np.flatnonzero((u_draws < thresh) & (taken == 0))
    room = k - count
    chosen = accepted[:room]
    taken[chosen] = 1
    sel[count:count + chosen.shape[0]] = chosen
    return count + chosen.shape[0]


def tally_linear_pass(comp_ranks, counts):
    """Tally linear-scheme acceptance events for one full pass (no dedup)."""
    n = comp_ranks.shape[0]
    ranks = np.arange(1, n + 1, dtype=np.int64)
    acc = ranks < comp_ranks
    counts += acc
    return int(acc.sum())


def tally_exp_pass(u_draws, gamma, counts):
    """Tally exponential-scheme acceptance events for one full pass."""
    n = u_draws.shape[0]
    thresh = np.exp(-gamma * np.arange(n, dtype=np.float64) / n)
    acc = u_draws < thresh
    counts += acc
    return int(acc.sum())


def mf_score_subset(p, item_factors, item_bias, items):
    """Logits of one user over an item subset: Q[items] @ p + b[items]."""
    return item_factors[items] @ p + item_bias[items]


def mf_score_all(p, item_factors, item_bias):
    """Logits of one user over the full catalogue."""
    return item_factors @ p + item_bias


def mf_user_step_sgd(p, item_factors, item_bias, items, gz, lr, l2):
    """Fused forward-free SGD update for one user.

    ``gz`` holds dL/dz per item in ``items`` (unique indices). Gradients
    are evaluated at the pre-update parameters: item rows and biases are
    updated with the old user vector, the user vector last.
    """
    rows = item_factors[items]
    g_user = gz @ rows
    grad_rows = np.outer(gz, p)
    item_factors[items] = rows - lr * (grad_rows + l2 * rows)
    item_bias[items] -= lr * (gz + l2 * item_bias[items])
    p -= lr * (g_user + l2 * p)


def mf_user_step_adagrad(p, item_factors, item_bias, items, gz, lr, l2, eps,
                         acc_p, acc_q, acc_b):
    """Fused Adagrad update for one user.

    Accumulators take the raw squared gradient; the l2 term enters only
    the update direction.
    """
    rows = item_factors[items]
    g_user = gz @ rows
    grad_rows = np.outer(gz, p)
    acc_q[items] += grad_rows ** 2
    item_factors[items] = rows - lr * (grad_rows + l2 * rows) / np.sqrt(acc_q[items] + eps)
    acc_b[items] += gz ** 2
    item_bias[items] -= lr * (gz + l2 * item_bias[items]) / np.sqrt(acc_b[items] + eps)
    acc_p += g_user ** 2
    p -= lr * (g_user + l2 * p) / np.sqrt(acc_p + eps)
