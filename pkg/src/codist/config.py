"""Run configuration: a small YAML schema validated before any compute.

Sections: ``model``, ``optimizer``, ``train``, ``distill``, ``teacher``,
``eval``, and (for the sweep command) ``sweep``.  Unknown sections or
keys are errors, so sweep scripts that generate configs fail fast
instead of silently training with defaults.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import yaml

from .distill.config import VARIANTS, DistillConfig
from .models import OptimizerConfig


class ConfigError(Exception):
    pass


SWEEP_GRID_KEYS = ("lam", "sample_size", "t1", "t2", "gamma", "dim")


@dataclass
class ModelConfig:
    kind: str = "mf"
    dim: int = 8
    init_std: float = 1.0
    corruption: float = 0.1

    def validate(self):
        if self.kind not in ("mf", "cdae"):
            raise ConfigError(f"model.kind must be mf or cdae, got {self.kind!r}")
        if self.dim < 1:
            raise ConfigError("model.dim must be >= 1")
        if self.init_std <= 0:
            raise ConfigError("model.init_std must be > 0")
        if not 0.0 <= self.corruption < 1.0:
            raise ConfigError("model.corruption must be in [0, 1)")
        return self


@dataclass
class TrainParams:
    epochs: int = 30
    seed: int = 0
    negative_ratio: float = 0.5

    def validate(self):
        if self.epochs < 0:
            raise ConfigError("train.epochs must be >= 0")
        if self.seed < 0:
            raise ConfigError("train.seed must be >= 0")
        if self.negative_ratio <= 0:
            raise ConfigError("train.negative_ratio must be > 0")
        return self


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    train: TrainParams = field(default_factory=TrainParams)
    distill: DistillConfig = field(default_factory=DistillConfig)
    teacher_checkpoint: str | None = None
    n_cutoff: int = 50
    sweep: dict | None = None

    def validate(self):
        self.model.validate()
        try:
            self.optimizer.validate()
            self.distill.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        self.train.validate()
        if self.n_cutoff < 1:
            raise ConfigError("eval.n_cutoff must be >= 1")
        if self.sweep is not None:
            _validate_sweep(self.sweep)
        return self

    def to_dict(self):
        d = {
            "model": asdict(self.model),
            "optimizer": asdict(self.optimizer),
            "train": asdict(self.train),
            "distill": asdict(self.distill),
            "eval": {"n_cutoff": self.n_cutoff},
        }
        if self.teacher_checkpoint is not None:
            d["teacher"] = {"checkpoint": self.teacher_checkpoint}
        if self.sweep is not None:
            d["sweep"] = self.sweep
        return d

    @classmethod
    def from_dict(cls, raw):
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a mapping")
        known = {"model", "optimizer", "train", "distill", "teacher", "eval", "sweep"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        cfg = cls(
            model=_section(ModelConfig, raw.get("model"), "model"),
            optimizer=_section(OptimizerConfig, raw.get("optimizer"), "optimizer"),
            train=_section(TrainParams, raw.get("train"), "train"),
            distill=_section(DistillConfig, raw.get("distill"), "distill"),
        )
        teacher = raw.get("teacher") or {}
        if teacher:
            unknown = set(teacher) - {"checkpoint"}
            if unknown:
                raise ConfigError(f"unknown teacher keys: {sorted(unknown)}")
            cfg.teacher_checkpoint = teacher.get("checkpoint")
        ev = raw.get("eval") or {}
        if ev:
            unknown = set(ev) - {"n_cutoff"}
            if unknown:
                raise ConfigError(f"unknown eval keys: {sorted(unknown)}")
            cfg.n_cutoff = int(ev.get("n_cutoff", 50))
        if "sweep" in raw and raw["sweep"] is not None:
            cfg.sweep = raw["sweep"]
        return cfg.validate()


def _section(cls, raw, name):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    fields = {f for f in cls.__dataclass_fields__}
    unknown = set(raw) - fields
    if unknown:
        raise ConfigError(f"unknown {name} keys: {sorted(unknown)}")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"bad {name} section: {exc}") from exc


def _validate_sweep(sweep):
    if not isinstance(sweep, dict):
        raise ConfigError("sweep section must be a mapping")
    unknown = set(sweep) - {"variant", "grid", "latency_reps"}
    if unknown:
        raise ConfigError(f"unknown sweep keys: {sorted(unknown)}")
    variant = sweep.get("variant", "cd-tg")
    if variant not in VARIANTS:
        raise ConfigError(f"sweep.variant must be one of {VARIANTS}")
    grid = sweep.get("grid") or {}
    if not isinstance(grid, dict):
        raise ConfigError("sweep.grid must be a mapping of parameter -> values")
    bad = set(grid) - set(SWEEP_GRID_KEYS)
    if bad:
        raise ConfigError(f"sweep.grid keys must be in {SWEEP_GRID_KEYS}; got {sorted(bad)}")
    for key, vals in grid.items():
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"sweep.grid.{key} must be a non-empty list")
    reps = sweep.get("latency_reps", 0)
    if not isinstance(reps, int) or reps < 0:
        raise ConfigError("sweep.latency_reps must be an int >= 0")


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    return RunConfig.from_dict(raw)
