"""Experiment configuration: nested dataclasses that round-trip through JSON."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields

from .denoiser import TrainConfig

OUTPUT_ENV = "VARMIA_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass
class DatasetConfig:
    kind: str = "shapes"          # shapes | gmm
    n: int = 400
    side: int = 16
    d: int = 2
    K: int = 4
    sigma: float = 0.04
    nonmembers: str = "holdout"   # holdout | style_shift
    stripe_width: int = 2


@dataclass
class ScheduleConfig:
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02


@dataclass
class AttackConfig:
    method: str = "rediffuse"     # rediffuse | rediffuse_plus | loss_baseline
    n: int = 10
    t: int | None = None          # None -> T // 5 (T // 100 for latent targets)
    k: int | None = None          # None -> t // 2
    distance: str = "lp"          # lp | ssim | learned
    p: int = 1
    latent: bool = False
    latent_dim: int = 32
    classifier_fraction: float = 0.2


@dataclass
class EvalConfig:
    target_fpr: float = 0.01
    tau: float | None = None


def default_output_dir() -> str:
    return os.environ.get(OUTPUT_ENV, "runs/default")


@dataclass
class ExperimentConfig:
    seed: int = 0
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    training: TrainConfig = field(default_factory=lambda: TrainConfig(
        hidden=(256, 256, 256), lr=2e-3, cosine_decay=True, epochs=10_000,
        max_steps=20_000))
    attack: AttackConfig = field(default_factory=AttackConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output_dir: str = field(default_factory=default_output_dir)
    workers: int = 1

    # ---- derived values -------------------------------------------------
    def attack_t(self) -> int:
        if self.attack.t is not None:
            return self.attack.t
        return max(1, self.schedule.T // (100 if self.attack.latent else 5))

    def attack_k(self) -> int:
        t = self.attack_t()
        return self.attack.k if self.attack.k is not None else max(1, t // 2)

    # ---- (de)serialization ---------------------------------------------
    def to_dict(self) -> dict:
        d = asdict(self)
        d["training"] = self.training.to_dict()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def config_hash(self) -> str:
        """Hash of everything that affects results (output location excluded)."""
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("workers")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        nested = {"dataset": DatasetConfig, "schedule": ScheduleConfig,
                  "training": TrainConfig, "attack": AttackConfig, "eval": EvalConfig}
        kwargs = {}
        for key, value in _checked(cls, d, "config").items():
            if key in nested:
                try:
                    kwargs[key] = nested[key](**_checked(nested[key], value, key))
                except (TypeError, ValueError) as err:
                    raise ConfigError(f"{key}: {err}") from None
            else:
                kwargs[key] = value
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as err:
            raise ConfigError(f"invalid JSON: {err}") from None

    def validate(self) -> None:
        ds, sc, at = self.dataset, self.schedule, self.attack
        if ds.kind not in ("shapes", "gmm"):
            raise ConfigError(f"dataset.kind must be shapes or gmm, got {ds.kind!r}")
        if ds.nonmembers not in ("holdout", "style_shift"):
            raise ConfigError("dataset.nonmembers must be holdout or style_shift")
        if ds.nonmembers == "style_shift" and ds.kind != "shapes":
            raise ConfigError("style_shift nonmembers need the shapes dataset")
        if ds.n < 2:
            raise ConfigError("dataset.n must be >= 2")
        if not (isinstance(sc.T, int) and sc.T >= 1):
            raise ConfigError("schedule.T must be a positive integer")
        if not (0 < sc.beta_start <= sc.beta_end < 1):
            raise ConfigError("need 0 < beta_start <= beta_end < 1")
        if at.method not in ("rediffuse", "rediffuse_plus", "loss_baseline"):
            raise ConfigError(f"unknown attack.method {at.method!r}")
        if at.distance not in ("lp", "ssim", "learned"):
            raise ConfigError(f"unknown attack.distance {at.distance!r}")
        if at.distance == "learned" and at.method != "rediffuse":
            raise ConfigError("the learned distance is only defined for rediffuse")
        if at.distance == "ssim" and ds.kind != "shapes":
            raise ConfigError("ssim distance needs image data")
        if not 1 <= at.p <= 8:
            raise ConfigError("attack.p must be in [1, 8]")
        if at.n < 1:
            raise ConfigError("attack.n must be >= 1")
        t = self.attack_t()
        if not 1 <= t <= sc.T:
            raise ConfigError(f"attack.t={t} must lie in [1, T={sc.T}]")
        if not 1 <= self.attack_k() <= t:
            raise ConfigError(f"attack.k={self.attack_k()} must lie in [1, t={t}]")
        if not 0.0 <= self.eval.target_fpr <= 1.0:
            raise ConfigError("eval.target_fpr must lie in [0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


def _checked(klass, d, where: str) -> dict:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name for f in fields(klass)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return d
