"""Run descriptors: validation, YAML/JSON loading, digests and execution."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .datasets import (BatchMode, BatchSpec, Dataset, IndexSplit, corrupt_labels, load_idx,
                       sample_prior_indices, synth_blobs)
from .models import ModelArch, ModelObjective, init_params
from .optimizers import Algorithm, Schedule, TrajectoryLog, run

__all__ = [
    "BatchConfig",
    "CertifyConfig",
    "CldConfig",
    "ConfigError",
    "DataConfig",
    "ModelConfig",
    "RunConfig",
    "RunResult",
    "ScheduleConfig",
    "SplitConfig",
    "build_data",
    "execute",
    "load_config",
]


class ConfigError(ValueError):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


@dataclass(frozen=True)
class DataConfig:
    source: str = "blobs"
    n: int = 2000
    input_dim: int = 2
    num_classes: int = 3
    separation: float = 4.0
    test_n: int = 10000
    label_noise: float = 0.0
    image_path: str | None = None
    label_path: str | None = None
    csv_path: str | None = None


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "linear_softmax"
    hidden: tuple = ()


@dataclass(frozen=True)
class SplitConfig:
    m: int = 0


@dataclass(frozen=True)
class ScheduleConfig:
    T: int = 0
    gamma: float = 0.0
    eps: float | None = None
    sigma: float | None = None
    alpha: float = 0.0
    beta: float | None = None
    lambda_reg: float = 0.0
    decay: str = "constant"
    decay_every: int = 1
    decay_factor: float = 0.9


@dataclass(frozen=True)
class BatchConfig:
    size: int = 1
    mode: str = "without_replacement"
    from_I: int | None = None
    from_J: int | None = None


@dataclass(frozen=True)
class CldConfig:
    dt: float = 0.01
    loss_bound: float | None = None


@dataclass(frozen=True)
class CertifyConfig:
    theorem: str | None = None
    eta: float = 1.0
    delta: float = 0.1
    extras: dict = field(default_factory=dict)


_SECTIONS = {
    "data": DataConfig,
    "model": ModelConfig,
    "split": SplitConfig,
    "schedule": ScheduleConfig,
    "batch": BatchConfig,
    "cld": CldConfig,
    "certify": CertifyConfig,
}
_REQUIRED = {"algorithm": "", "split": "m", "schedule": "T gamma"}


@dataclass(frozen=True)
class RunConfig:
    algorithm: str
    seed: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    batch: BatchConfig | None = None
    cld: CldConfig | None = None
    certify: CertifyConfig = field(default_factory=CertifyConfig)
    eval_every: int = 0
    out: str | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "configuration must be a mapping")
        known = {f.name for f in dataclasses.fields(cls)}
        for key in raw:
            if key not in known:
                raise ConfigError(key, "unknown field")
        if "algorithm" not in raw:
            raise ConfigError("algorithm", "required field is missing")
        kwargs = {}
        for key, val in raw.items():
            if key in _SECTIONS:
                if val is None:
                    continue
                kwargs[key] = _section(key, _SECTIONS[key], val)
            else:
                kwargs[key] = val
        for section, names in _REQUIRED.items():
            for name in names.split():
                if section not in raw or not isinstance(raw[section], dict) or name not in raw[section]:
                    raise ConfigError(f"{section}.{name}", "required field is missing")
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def digest(self) -> str:
        """sha256 of the canonical JSON form (the output directory is excluded)."""
        d = self.to_dict()
        d.pop("out", None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def replace(self, **changes) -> "RunConfig":
        """Copy with top-level fields or dotted section fields (``"split.m"``) replaced."""
        d = self.to_dict()
        for key, val in changes.items():
            key = key.replace("__", ".")
            if "." in key:
                section, name = key.split(".", 1)
                if d.get(section) is None:
                    d[section] = {}
                d[section][name] = val
            else:
                d[key] = val
        return RunConfig.from_dict(d)

    def validate(self) -> None:
        try:
            algo = Algorithm(self.algorithm)
        except ValueError:
            raise ConfigError("algorithm", f"unknown algorithm {self.algorithm!r}; "
                                           f"choose from {[a.value for a in Algorithm]}") from None
        _check(isinstance(self.seed, int) and self.seed >= 0, "seed", "must be a non-negative integer")
        _check(isinstance(self.eval_every, int) and self.eval_every >= 0, "eval_every", "must be >= 0")
        d = self.data
        _check(d.source in ("blobs", "idx", "csv"), "data.source", "must be blobs, idx or csv")
        _check(isinstance(d.n, int) and d.n >= 2, "data.n", "must be an integer >= 2")
        _check(isinstance(d.test_n, int) and d.test_n >= 0, "data.test_n", "must be >= 0")
        _check(0.0 <= d.label_noise <= 1.0, "data.label_noise", "must lie in [0, 1]")
        if d.source == "blobs":
            _check(d.input_dim >= 1, "data.input_dim", "must be >= 1")
            _check(d.num_classes >= 2, "data.num_classes", "must be >= 2")
            _check(math.isfinite(d.separation) and d.separation >= 0, "data.separation", "must be >= 0")
        elif d.source == "idx":
            _check(bool(d.image_path), "data.image_path", "required for idx data")
            _check(bool(d.label_path), "data.label_path", "required for idx data")
        else:
            _check(bool(d.csv_path), "data.csv_path", "required for csv data")
        _check(self.model.kind in ("linear_softmax", "mlp"), "model.kind", "must be linear_softmax or mlp")
        _check(self.model.kind == "mlp" or not self.model.hidden, "model.hidden", "only an mlp has hidden layers")
        _check(self.model.kind != "mlp" or len(self.model.hidden) > 0, "model.hidden", "an mlp needs widths")
        _check(all(isinstance(h, int) and h >= 1 for h in self.model.hidden), "model.hidden", "widths must be >= 1")
        _check(isinstance(self.split.m, int) and 0 <= self.split.m < d.n, "split.m", f"must lie in [0, {d.n})")
        s = self.schedule
        _check(isinstance(s.T, int) and s.T >= 0, "schedule.T", "must be a non-negative integer")
        _check(math.isfinite(s.gamma) and s.gamma >= 0, "schedule.gamma", "must be >= 0")
        _check(s.decay in ("constant", "step", "inverse_t"), "schedule.decay", "must be constant, step or inverse_t")
        _check(s.alpha >= 0, "schedule.alpha", "must be >= 0")
        if algo in (Algorithm.FGD, Algorithm.FSGD, Algorithm.RGD):
            _check(s.eps is not None and s.eps > 0, "schedule.eps", f"{algo.value} needs eps > 0")
        if algo is Algorithm.RGD:
            _check(s.eps < 1, "schedule.eps", "rgd needs eps < 1")
        if algo in (Algorithm.GLD, Algorithm.SGLD):
            _check(s.sigma is not None and s.sigma > 0, "schedule.sigma", f"{algo.value} needs sigma > 0")
        if algo is Algorithm.CLD:
            _check(s.beta is not None and s.beta > 0, "schedule.beta", "cld needs beta > 0")
            _check(s.lambda_reg > 0, "schedule.lambda_reg", "cld needs lambda_reg > 0")
            _check(self.cld is not None, "cld", "cld needs a cld section with dt")
            _check(self.cld.dt > 0, "cld.dt", "must be > 0")
        if algo in (Algorithm.FSGD, Algorithm.SGLD, Algorithm.SGD):
            _check(self.batch is not None, "batch", f"{algo.value} needs a batch section")
            try:
                mode = BatchMode(self.batch.mode)
            except ValueError:
                raise ConfigError("batch.mode", f"unknown batch mode {self.batch.mode!r}") from None
            if algo is Algorithm.SGLD:
                _check(mode is BatchMode.WITH_REPLACEMENT, "batch.mode", "sgld needs with_replacement")
            if mode is BatchMode.STRATIFIED_IJ:
                _check(self.batch.from_I is not None and self.batch.from_J is not None, "batch.from_I",
                       "stratified batches need from_I and from_J")
            else:
                _check(self.batch.size >= 1, "batch.size", "must be >= 1")
        c = self.certify
        _check(math.isfinite(c.eta) and c.eta > 0, "certify.eta", "must be > 0")
        _check(0 < c.delta < 1, "certify.delta", "must lie in (0, 1)")

    def batch_spec(self) -> BatchSpec | None:
        if self.batch is None:
            return None
        mode = BatchMode(self.batch.mode)
        if mode is BatchMode.STRATIFIED_IJ:
            return BatchSpec.stratified(self.batch.from_I, self.batch.from_J)
        return BatchSpec(self.batch.size, mode)

    def build_schedule(self) -> Schedule:
        s = self.schedule
        kw = dict(alpha=s.alpha, beta=s.beta, lambda_reg=s.lambda_reg)
        if s.decay == "step":
            return Schedule.step_decay(s.T, s.gamma, s.decay_every, s.decay_factor, s.eps, s.sigma, **kw)
        if s.decay == "inverse_t":
            return Schedule.inverse_t(s.T, s.gamma, s.eps, s.sigma, **kw)
        return Schedule.constant(s.T, s.gamma, s.eps, s.sigma, **kw)

    def arch(self, input_dim: int, num_classes: int) -> ModelArch:
        return ModelArch(self.model.kind, input_dim, num_classes, tuple(self.model.hidden))


def _check(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise ConfigError(path, msg)


def _section(name: str, cls, raw) -> object:
    if not isinstance(raw, dict):
        raise ConfigError(name, "must be a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{name}.{key}", "unknown field")
    vals = dict(raw)
    if "hidden" in vals:
        vals["hidden"] = tuple(vals["hidden"] or ())
    for key, val in vals.items():
        default = known[key].default
        if isinstance(default, float) and isinstance(val, int) and not isinstance(val, bool):
            vals[key] = float(val)
        elif isinstance(val, str) and isinstance(default, float):
            raise ConfigError(f"{name}.{key}", f"expected a number, got {val!r}")
    try:
        return cls(**vals)
    except TypeError as exc:
        raise ConfigError(name, str(exc)) from None


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def load_config(path) -> RunConfig:
    """Read YAML (``.yaml``/``.yml``) or JSON."""
    path = Path(path)
    text = path.read_text()
    try:
        raw = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(str(path), f"cannot parse: {exc}") from None
    return RunConfig.from_dict(raw)


@dataclass(eq=False)
class RunResult:
    config: RunConfig
    log: TrajectoryLog
    data: Dataset
    split: IndexSplit
    objective: ModelObjective
    test_objective: ModelObjective | None


def _streams(seed: int) -> dict:
    names = ("data", "test", "labels", "split", "init", "algorithm")
    return dict(zip(names, np.random.SeedSequence(seed).spawn(len(names))))


def build_data(cfg: RunConfig) -> tuple[Dataset, Dataset | None]:
    """Training set (after label noise) and held-out test set for ``cfg``."""
    d = cfg.data
    streams = _streams(cfg.seed)
    if d.source == "blobs":
        train = synth_blobs(d.n, d.input_dim, d.num_classes, d.separation, np.random.default_rng(streams["data"]))
        test = synth_blobs(d.test_n, d.input_dim, d.num_classes, d.separation,
                           np.random.default_rng(streams["test"])) if d.test_n else None
    else:
        full = load_idx(d.image_path, d.label_path) if d.source == "idx" else Dataset.from_csv(d.csv_path)
        if full.n < d.n + d.test_n:
            raise ConfigError("data.n", f"source has {full.n} rows, config needs n + test_n = {d.n + d.test_n}")
        order = np.random.default_rng(streams["data"]).permutation(full.n)
        train = full.take(order[: d.n])
        test = full.take(order[d.n: d.n + d.test_n]) if d.test_n else None
    if d.label_noise > 0:
        train = corrupt_labels(train, d.label_noise, np.random.default_rng(streams["labels"]))
    return train, test


def execute(cfg: RunConfig, snapshot_every: int = 0) -> RunResult:
    streams = _streams(cfg.seed)
    train, test = build_data(cfg)
    arch = cfg.arch(train.input_dim, train.num_classes)
    obj = ModelObjective(arch, train)
    test_obj = ModelObjective(arch, test) if test is not None else None
    split = sample_prior_indices(train.n, cfg.split.m, np.random.default_rng(streams["split"]))
    algo = Algorithm(cfg.algorithm)
    w0 = None if algo is Algorithm.CLD else init_params(arch, np.random.default_rng(streams["init"]))
    log = run(algo, obj, cfg.build_schedule(), split, w0=w0, seed=np.random.default_rng(streams["algorithm"]),
              batch=cfg.batch_spec(), dt=cfg.cld.dt if cfg.cld else None,
              loss_bound=cfg.cld.loss_bound if cfg.cld else None, test_obj=test_obj,
              eval_every=cfg.eval_every, snapshot_every=snapshot_every,
              metadata={"seed": cfg.seed, "config_digest": cfg.digest(), "arch": arch.as_dict()})
    return RunResult(cfg, log, train, split, obj, test_obj)
