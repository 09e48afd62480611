"""Distillation hyperparameters and the named training variants."""

from __future__ import annotations

from dataclasses import dataclass, replace

SAMPLING_MODES = ("linear", "exponential", "random", "top_k")
TACTICS = ("teacher", "student")
LOSS_FAMILIES = ("cd", "rd")

VARIANTS = ("plain", "cd-base", "cd-tg", "cd-sg", "rd", "rd-rank")


@dataclass
class DistillConfig:
    """Knobs of the student objective and its soft-target selection.

    ``sample_size`` is an absolute count when int, or a fraction of the
    base set when float in (0, 1]; ``sample_basis`` picks whether the
    fraction applies to the user's unrated items or positives.
    ``resample_period`` is a step count between re-selections, or None
    for once per epoch.
    """

    lam: float = 0.5
    rho: float = 0.5
    t1: float = 2.0
    t2: float = 1.0
    sample_size: float = 0.5
    sample_basis: str = "unrated"
    sampling: str = "linear"
    gamma: float = 5.0
    tactic: str = "teacher"
    loss_family: str = "cd"
    resample_period: int | None = None
    max_passes: int = 10
    cache_teacher_scores: bool = True

    def validate(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must be in [0, 1]")
        if self.t1 <= 0:
            raise ValueError("t1 must be > 0")
        if isinstance(self.sample_size, bool) or self.sample_size is None:
            raise ValueError("sample_size must be an int count or float fraction")
        if isinstance(self.sample_size, int):
            if self.sample_size < 1:
                raise ValueError("sample_size count must be >= 1")
        else:
            if not 0.0 < float(self.sample_size) <= 1.0:
                raise ValueError("sample_size fraction must be in (0, 1]")
        if self.sample_basis not in ("unrated", "positives"):
            raise ValueError(f"unknown sample_basis {self.sample_basis!r}")
        if self.sampling not in SAMPLING_MODES:
            raise ValueError(f"unknown sampling mode {self.sampling!r}")
        if self.sampling == "exponential" and self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if self.tactic not in TACTICS:
            raise ValueError(f"unknown tactic {self.tactic!r}")
        if self.loss_family not in LOSS_FAMILIES:
            raise ValueError(f"unknown loss family {self.loss_family!r}")
        if self.resample_period is not None and self.resample_period < 1:
            raise ValueError("resample_period must be >= 1 or None")
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")
        return self

    def resolve_k(self, num_unrated, num_positives):
        """Concrete per-user sample size."""
        if isinstance(self.sample_size, int):
            return self.sample_size
        base = num_unrated if self.sample_basis == "unrated" else num_positives
        return max(1, int(float(self.sample_size) * base))


def variant_config(variant, base=None):
    """Resolve a named variant to a concrete config.

    plain    positive-only CF loss, no distillation (lam forced to 0)
    cd-base  soft-target loss with random sampling
    cd-tg    soft-target loss, rank-aware sampling, teacher-guided
    cd-sg    soft-target loss, rank-aware sampling, student-guided
    rd       quantized top-K distillation (teacher's top ranks as positives)
    rd-rank  quantized losses with rank-aware sampling

    Rank-aware variants keep the base config's sampling mode when it is
    already rank-aware, otherwise fall back to linear.
    """
    cfg = base if base is not None else DistillConfig()
    rank_aware = cfg.sampling if cfg.sampling in ("linear", "exponential") else "linear"
    if variant == "plain":
        cfg = replace(cfg, lam=0.0, loss_family="cd")
    elif variant == "cd-base":
        cfg = replace(cfg, loss_family="cd", sampling="random", tactic="teacher")
    elif variant == "cd-tg":
        cfg = replace(cfg, loss_family="cd", sampling=rank_aware, tactic="teacher")
    elif variant == "cd-sg":
        cfg = replace(cfg, loss_family="cd", sampling=rank_aware, tactic="student")
    elif variant == "rd":
        cfg = replace(cfg, loss_family="rd", sampling="top_k", tactic="teacher")
    elif variant == "rd-rank":
        cfg = replace(cfg, loss_family="rd", sampling=rank_aware, tactic="teacher")
    else:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    return cfg.validate()
