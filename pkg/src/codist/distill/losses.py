"""Point-wise ranking and distillation losses, with gradients in logit space.

Every function takes logits, converts to probabilities with a (clamped)
logistic, and returns ``(loss, dL/dz)`` so models only ever see dL/dz.
Gradient identities: bce/cf positives p-1, bce negatives p, soft-target
p-q, weighted top-k w*(p-1).
"""

from __future__ import annotations

import numpy as np

CLAMP_EPS = 1e-7


class LossError(Exception):
    pass


def sigmoid(z):
    """Numerically stable logistic."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _clamp(p):
    return np.clip(p, CLAMP_EPS, 1.0 - CLAMP_EPS)


def tempered_logistic(z, t1, t2):
    """Soft-target probability q = sigmoid((z + t2) / t1).

    ``t1`` scales (flattens) the logit, ``t2`` shifts it. Output clamped
    away from {0, 1} so downstream logs are safe.
    """
    if t1 <= 0:
        raise ValueError("temperature scale t1 must be > 0")
    return _clamp(sigmoid((np.asarray(z, dtype=np.float64) + t2) / t1))


def pointwise_bce_loss(z_pos, z_neg):
    """Negative log likelihood of binary feedback over positives and
    (sampled) negatives. Returns (loss, g_pos, g_neg)."""
    z_pos = np.asarray(z_pos, dtype=np.float64)
    z_neg = np.asarray(z_neg, dtype=np.float64)
    if z_pos.shape[0] == 0:
        raise LossError("pointwise bce needs at least one positive")
    p_pos = sigmoid(z_pos)
    p_neg = sigmoid(z_neg)
    loss = -np.log(_clamp(p_pos)).sum() - np.log(_clamp(1.0 - p_neg)).sum()
    return float(loss), p_pos - 1.0, p_neg.copy()


def cf_loss_cd(z_pos):
    """Selective cross entropy over positives only; missing feedback is
    excluded entirely. A user with no positives contributes nothing."""
    z_pos = np.asarray(z_pos, dtype=np.float64)
    if z_pos.shape[0] == 0:
        return 0.0, np.empty(0, dtype=np.float64)
    p = sigmoid(z_pos)
    return float(-np.log(_clamp(p)).sum()), p - 1.0


def kd_loss_cd(z, q):
    """Sampling-based soft-target cross entropy over items drawn from the
    unrated set: -sum q*log p + (1-q)*log(1-p). Gradient is p - q."""
    z = np.asarray(z, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if z.shape != q.shape:
        raise LossError("logits and soft targets must align")
    if q.size and (q.min() < 0.0 or q.max() > 1.0):
        raise LossError("soft targets must lie in [0, 1]")
    p = _clamp(sigmoid(z))
    loss = -(q * np.log(p) + (1.0 - q) * np.log(1.0 - p)).sum()
    return float(loss), sigmoid(z) - q


def total_loss_cd(cf, kd, lam):
    """Combined objective cf + lambda * kd."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    return cf + lam * kd


def kd_loss_rd(z, weights=None):
    """Distillation loss over the teacher's top-K unrated items, all
    treated as positives (quantized soft target): -sum w_i * log p_i.
    ``weights`` defaults to uniform 1/K and must sum to 1."""
    z = np.asarray(z, dtype=np.float64)
    k = z.shape[0]
    if k == 0:
        raise LossError("top-k distillation needs a non-empty item set")
    if weights is None:
        weights = np.full(k, 1.0 / k)
    else:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != z.shape:
            raise LossError("weights must align with logits")
        if abs(weights.sum() - 1.0) > 1e-9:
            raise LossError("weights must sum to 1")
    p = sigmoid(z)
    loss = -(weights * np.log(_clamp(p))).sum()
    return float(loss), weights * (p - 1.0)


def total_loss_rd(cf, kd, rho):
    """Balanced objective (1 - rho) * cf + rho * kd."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must be in [0, 1]")
    return (1.0 - rho) * cf + rho * kd
