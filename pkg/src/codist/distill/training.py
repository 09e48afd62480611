"""Training loops: teacher fitting and student distillation.

Every random draw comes from a stream keyed by (seed, purpose, epoch,
user), so runs are reproducible under single-threaded execution and a
student with the distillation term disabled consumes exactly the same
draws as a plain student (the distillation stream is never touched when
lam == 0).  A non-finite gradient or epoch loss aborts the run and rolls
the model back to the last epoch that completed cleanly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..models import Optimizer, OptimizerError
from .config import DistillConfig
from .losses import (
    cf_loss_cd,
    kd_loss_cd,
    kd_loss_rd,
    pointwise_bce_loss,
    total_loss_cd,
    total_loss_rd,
)
from .sampling import sample_random
from .tactics import SoftTargetSelector

log = logging.getLogger(__name__)

# stream purposes; INIT (0) is reserved for model parameter draws
STREAM_NEG = 1
STREAM_KD = 2
STREAM_CORRUPT = 3
STREAM_ORDER = 4


class TrainingError(Exception):
    pass


def stream_rng(seed, purpose, *keys):
    """Independent generator for one (purpose, epoch, user) slot."""
    return np.random.default_rng(np.random.SeedSequence((seed, purpose) + keys))


@dataclass
class TrainResult:
    model: object
    trace: list = field(default_factory=list)
    diverged: bool = False
    epochs_run: int = 0


def negative_count(num_pos, ratio):
    return max(1, int(round(ratio * num_pos)))


def merge_item_grads(items, gz):
    """Sum dL/dz over duplicate item indices (kernels require unique rows)."""
    uniq, inv = np.unique(items, return_inverse=True)
    if uniq.size == items.size:
        return items, gz
    return uniq, np.bincount(inv, weights=gz, minlength=uniq.size)


def _check_disjoint(pos, selected):
    # pos is sorted per dataset invariant
    idx = np.searchsorted(pos, selected)
    idx[idx == pos.size] = pos.size - 1
    if pos.size and np.any(pos[idx] == selected):
        raise TrainingError("soft-target items overlap the user's positives")


def _corrupt_mask(model, pos, seed, epoch, u):
    if model.kind != "cdae" or model.corruption <= 0:
        return None
    rng = stream_rng(seed, STREAM_CORRUPT, epoch, u)
    return model.draw_corrupt_mask(pos.size, rng)


def _fit(model, train, optimizer_cfg, epochs, seed, user_step, trace_sink):
    opt = Optimizer(optimizer_cfg, model.params())
    snap = {k: v.copy() for k, v in model.params().items()}
    snap_acc = {k: v.copy() for k, v in opt.acc.items()}
    trace = []
    result = TrainResult(model, trace)
    step = 0
    for epoch in range(1, epochs + 1):
        order = stream_rng(seed, STREAM_ORDER, epoch).permutation(model.num_users)
        cf_sum = kd_sum = tot_sum = 0.0
        seen = 0
        try:
            for u in order:
                u = int(u)
                pos = train.user_items(u)
                if pos.size == 0:
                    continue
                step += 1
                cf, kd, tot = user_step(opt, u, pos, epoch, step)
                cf_sum += cf
                kd_sum += kd
                tot_sum += tot
                seen += 1
            mean_total = tot_sum / max(seen, 1)
            if not math.isfinite(mean_total):
                raise OptimizerError("non-finite epoch loss")
        except OptimizerError as exc:
            log.error("epoch %d diverged (%s); rolled back to epoch %d",
                      epoch, exc, result.epochs_run)
            for k, v in model.params().items():
                v[...] = snap[k]
            for k, v in opt.acc.items():
                v[...] = snap_acc[k]
            result.diverged = True
            return result
        row = {"epoch": epoch, "step": step,
               "cf_loss": cf_sum / max(seen, 1),
               "kd_loss": kd_sum / max(seen, 1),
               "total": mean_total}
        trace.append(row)
        if trace_sink is not None:
            trace_sink(row)
        snap = {k: v.copy() for k, v in model.params().items()}
        snap_acc = {k: v.copy() for k, v in opt.acc.items()}
        result.epochs_run = epoch
    return result


def train_teacher(model, train, optimizer_cfg, epochs, seed,
                  negative_ratio=0.5, trace_sink=None):
    """Fit a model on its own with the positive/sampled-negative loss."""
    if model.num_users != train.num_users or model.num_items != train.num_items:
        raise TrainingError("model and dataset dimensions disagree")

    def step_fn(opt, u, pos, epoch, step):
        neg_rng = stream_rng(seed, STREAM_NEG, epoch, u)
        negs = sample_random(train.unrated_items(u),
                             negative_count(pos.size, negative_ratio), neg_rng)
        ctx = model.begin_user(u, pos, _corrupt_mask(model, pos, seed, epoch, u))
        loss, g_pos, g_neg = pointwise_bce_loss(ctx.score(pos), ctx.score(negs))
        items, gz = merge_item_grads(np.concatenate([pos, negs]),
                                     np.concatenate([g_pos, g_neg]))
        ctx.apply(items, gz, opt)
        return loss, 0.0, loss

    return _fit(model, train, optimizer_cfg, epochs, seed, step_fn, trace_sink)


def train_student(student, teacher, train, distill_cfg, optimizer_cfg, epochs,
                  seed, negative_ratio=0.5, trace_sink=None):
    """Distill ``teacher`` into ``student`` on the same training split.

    The soft-target family ("cd") pairs a positive-only CF term with a
    tempered soft-target term weighted by lam; the quantized family
    ("rd") mixes a sampled-negative BCE term with a weighted log loss
    over selected items at ratio rho.  ``teacher`` may be None when the
    config never consults it (lam == 0 in the cd family).
    """
    cfg = distill_cfg if distill_cfg is not None else DistillConfig()
    cfg.validate()
    if student.num_users != train.num_users or student.num_items != train.num_items:
        raise TrainingError("student and dataset dimensions disagree")
    needs_teacher = not (cfg.loss_family == "cd" and cfg.lam == 0.0)
    if needs_teacher:
        if teacher is None:
            raise TrainingError("this configuration distills from a teacher; none given")
        if (teacher.num_users != student.num_users
                or teacher.num_items != student.num_items):
            raise TrainingError("teacher and student dimensions disagree")
    selector = SoftTargetSelector(teacher, train, cfg) if needs_teacher else None

    def select(u, epoch, step):
        kd_rng = stream_rng(seed, STREAM_KD, epoch, u)
        return selector.select(u, student, epoch, step, kd_rng)

    def step_cd(opt, u, pos, epoch, step):
        sel, q = select(u, epoch, step) if cfg.lam > 0 else (None, None)
        ctx = student.begin_user(u, pos, _corrupt_mask(student, pos, seed, epoch, u))
        cf, g_pos = cf_loss_cd(ctx.score(pos))
        if sel is None or sel.size == 0:
            ctx.apply(pos, g_pos, opt)
            return cf, 0.0, cf
        _check_disjoint(pos, sel)
        kd, g_kd = kd_loss_cd(ctx.score(sel), q)
        items, gz = merge_item_grads(np.concatenate([pos, sel]),
                                     np.concatenate([g_pos, cfg.lam * g_kd]))
        ctx.apply(items, gz, opt)
        return cf, kd, total_loss_cd(cf, kd, cfg.lam)

    def step_rd(opt, u, pos, epoch, step):
        sel, _ = select(u, epoch, step) if cfg.rho > 0 else (None, None)
        neg_rng = stream_rng(seed, STREAM_NEG, epoch, u)
        negs = sample_random(train.unrated_items(u),
                             negative_count(pos.size, negative_ratio), neg_rng)
        ctx = student.begin_user(u, pos, _corrupt_mask(student, pos, seed, epoch, u))
        cf, g_pos, g_neg = pointwise_bce_loss(ctx.score(pos), ctx.score(negs))
        if sel is None or sel.size == 0:
            items, gz = merge_item_grads(np.concatenate([pos, negs]),
                                         np.concatenate([g_pos, g_neg]))
            ctx.apply(items, gz, opt)
            return cf, 0.0, total_loss_rd(cf, 0.0, cfg.rho)
        _check_disjoint(pos, sel)
        kd, g_kd = kd_loss_rd(ctx.score(sel))
        one_m_rho = 1.0 - cfg.rho
        items, gz = merge_item_grads(
            np.concatenate([pos, negs, sel]),
            np.concatenate([one_m_rho * g_pos, one_m_rho * g_neg, cfg.rho * g_kd]))
        ctx.apply(items, gz, opt)
        return cf, kd, total_loss_rd(cf, kd, cfg.rho)

    step_fn = step_cd if cfg.loss_family == "cd" else step_rd
    return _fit(student, train, optimizer_cfg, epochs, seed, step_fn, trace_sink)
