"""Instrumented update rules.

Every step returns the new :class:`OptState` and a record (a plain dict)
holding the exact per-step quantities the matching certificate consumes.
Steps are indexed from ``t = 1``; schedule entry ``t - 1`` is used at step
``t``.  :func:`run` strings steps together into a :class:`TrajectoryLog`.

Column glossary (``g`` is the unfloored gradient difference
``grad f(W, S) - grad f(W, S_J)``, or its mini-batch analogue for FSGD):

``grad_diff_sq``                 ``|g|^2``
``grad_diff_sq_weighted_eps``    ``(gamma/eps)^2 |g|^2``
``grad_diff_sq_weighted_sigma``  ``(gamma/sigma)^2 |g|^2``
``grad_diff_sq_weighted_gamma``  ``gamma^2 |g|^2``
``lattice_sq``                   ``sum a^2`` of the integer vector added by the floor
``Lw_sq`` / ``Lw_sq_weighted``   ``L(W)^2`` and ``(gamma/sigma)^2 L(W)^2``
``cld_quad``                     ``e^{alpha (t_left - horizon)} |g|^2 dt``
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datasets import BatchMode, BatchSpec, IndexSplit, sample_batch
from .discrete_noise import floor_vec, round_vec

__all__ = [
    "Algorithm",
    "OptState",
    "STEP_COLUMNS",
    "Schedule",
    "StepError",
    "TrajectoryLog",
    "run",
    "step_cld_em",
    "step_fgd",
    "step_fsgd",
    "step_gd",
    "step_gld",
    "step_rgd",
    "step_sgd",
    "step_sgld",
]

GAUSSIAN_ALGORITHM = "numpy PCG64 + standard_normal (ziggurat)"

STEP_COLUMNS = (
    "t",
    "gamma",
    "eps",
    "sigma",
    "loss_S",
    "grad_diff_sq",
    "grad_diff_sq_weighted_eps",
    "grad_diff_sq_weighted_sigma",
    "grad_diff_sq_weighted_gamma",
    "lattice_sq",
    "floor_residual_max",
    "Lw_sq",
    "Lw_sq_weighted",
    "batch_size",
    "prior_batch_size",
    "empty_prior_batch",
    "batch_grad_dev_sq",
    "cld_quad",
    "train_risk_S",
    "train_risk_I",
    "train_risk_J",
    "test_risk",
)

RISK_COLUMNS = ("train_risk_S", "train_risk_I", "train_risk_J", "test_risk")


class Algorithm(str, enum.Enum):
    FGD = "fgd"
    FSGD = "fsgd"
    RGD = "rgd"
    GLD = "gld"
    SGLD = "sgld"
    CLD = "cld"
    GD = "gd"
    SGD = "sgd"


class StepError(RuntimeError):
    def __init__(self, step: int, cause: Exception):
        super().__init__(f"step {step}: {type(cause).__name__}: {cause}")
        self.step = step


def _per_step(values, T: int, name: str) -> np.ndarray | None:
    if values is None:
        return None
    arr = np.broadcast_to(np.asarray(values, dtype=float), (T,)).copy() if np.ndim(values) == 0 \
        else np.asarray(values, dtype=float)
    if arr.shape[0] < T:
        raise ValueError(f"{name} has {arr.shape[0]} entries, need at least T={T}")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValueError(f"{name} entries must be finite and > 0")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Schedule:
    """Per-step hyperparameters; ``gamma[t-1]`` is used at step ``t``.

    ``gamma`` may be zero (noise-only runs); ``eps`` and ``sigma`` must be
    strictly positive where present.
    """

    T: int
    gamma: np.ndarray
    eps: np.ndarray | None = None
    sigma: np.ndarray | None = None
    alpha: float = 0.0
    beta: float | None = None
    lambda_reg: float = 0.0

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 0:
            raise ValueError(f"T must be a non-negative integer, got {self.T}")
        g = np.asarray(self.gamma, dtype=float)
        if g.ndim == 0:
            g = np.full(self.T, float(g))
        if g.shape[0] < self.T or not np.all(np.isfinite(g)) or np.any(g < 0):
            raise ValueError(f"gamma needs {self.T} finite non-negative entries")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "eps", _per_step(self.eps, self.T, "eps"))
        object.__setattr__(self, "sigma", _per_step(self.sigma, self.T, "sigma"))
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.beta is not None and not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not self.lambda_reg >= 0:
            raise ValueError(f"lambda_reg must be >= 0, got {self.lambda_reg}")

    @classmethod
    def constant(cls, T, gamma, eps=None, sigma=None, **kw) -> "Schedule":
        return cls(T, np.full(T, float(gamma)),
                   None if eps is None else np.full(T, float(eps)),
                   None if sigma is None else np.full(T, float(sigma)), **kw)

    @classmethod
    def step_decay(cls, T, gamma, every: int, factor: float = 0.9, eps=None, sigma=None, **kw) -> "Schedule":
        """``gamma_t = gamma * factor^floor((t-1)/every)``."""
        if every < 1:
            raise ValueError("decay interval must be >= 1")
        g = gamma * factor ** (np.arange(T) // every)
        return cls(T, g, None if eps is None else np.full(T, float(eps)),
                   None if sigma is None else np.full(T, float(sigma)), **kw)

    @classmethod
    def inverse_t(cls, T, c, eps=None, sigma=None, **kw) -> "Schedule":
        """``gamma_t = c / t``."""
        g = c / np.arange(1, T + 1)
        return cls(T, g, None if eps is None else np.full(T, float(eps)),
                   None if sigma is None else np.full(T, float(sigma)), **kw)

    def need(self, name: str) -> np.ndarray:
        arr = getattr(self, name)
        if arr is None:
            raise ValueError(f"schedule is missing {name}")
        return arr

    def as_dict(self) -> dict:
        out = {"T": self.T, "alpha": self.alpha, "beta": self.beta, "lambda_reg": self.lambda_reg}
        for name in ("gamma", "eps", "sigma"):
            arr = getattr(self, name)
            out[name] = None if arr is None else [float(v) for v in arr[: self.T]]
        return out


@dataclass(frozen=True, eq=False)
class OptState:
    w: np.ndarray
    w_prev: np.ndarray
    t: int = 0

    @classmethod
    def start(cls, w0) -> "OptState":
        w0 = np.array(w0, dtype=float)
        return cls(w0, w0.copy(), 0)

    def advance(self, w_new) -> "OptState":
        return OptState(w_new, self.w, self.t + 1)


def _momentum(state: OptState, alpha: float) -> np.ndarray:
    return alpha * (state.w - state.w_prev) if alpha else 0.0


def _prior_grad(obj, w, split: IndexSplit):
    # An empty prior set has no gradient; treat it as zero.
    if split.m == 0:
        return np.zeros(obj.dim)
    return obj.grad(w, split.J)


def _floor_update(step_vec: np.ndarray, eps: float):
    a = floor_vec(step_vec / eps)
    residual = step_vec - eps * a
    return a, residual


def _diff_columns(rec: dict, g: np.ndarray, gamma: float, eps=None, sigma=None) -> None:
    sq = float(g @ g)
    rec["grad_diff_sq"] = sq
    rec["grad_diff_sq_weighted_gamma"] = gamma**2 * sq
    if eps is not None:
        rec["grad_diff_sq_weighted_eps"] = (gamma / eps) ** 2 * sq
    if sigma is not None:
        rec["grad_diff_sq_weighted_sigma"] = (gamma / sigma) ** 2 * sq


def step_fgd(state: OptState, obj, split: IndexSplit, sched: Schedule, t: int):
    """Floored GD with momentum ``alpha``.

    ``W_t = W_{t-1} + alpha (W_{t-1} - W_{t-2}) - gamma g_J - eps floor(gamma (g_S - g_J) / eps)``.
    """
    gamma, eps = sched.gamma[t - 1], sched.need("eps")[t - 1]
    w = state.w
    lg = obj.loss_grad(w)
    gJ = _prior_grad(obj, w, split)
    g = lg.grad - gJ
    a, residual = _floor_update(gamma * g, eps)
    w_new = w + _momentum(state, sched.alpha) - gamma * gJ - eps * a
    rec = {"t": t, "gamma": gamma, "eps": eps, "loss_S": lg.loss,
           "lattice_sq": float(a @ a), "floor_residual_max": float(np.max(np.abs(residual), initial=0.0)),
           "empty_prior_batch": float(split.m == 0)}
    _diff_columns(rec, g, gamma, eps=eps)
    return state.advance(w_new), rec


def step_fsgd(state: OptState, obj, split: IndexSplit, sched: Schedule, batch: BatchSpec, t: int,
              rng: np.random.Generator, prior_mask: np.ndarray | None = None):
    """Floored SGD: ``g1`` on the batch ``B_t``, ``g2`` on ``J`` intersected with ``B_t``.

    When the intersection is empty ``g2`` is the zero vector and the record
    carries ``empty_prior_batch = 1``.
    """
    gamma, eps = sched.gamma[t - 1], sched.need("eps")[t - 1]
    if prior_mask is None:
        prior_mask = split.in_prior()
    B = sample_batch(split, batch, rng)
    BJ = B[prior_mask[B]]
    w = state.w
    lg = obj.loss_grad(w, B)
    empty = BJ.size == 0
    g2 = np.zeros(obj.dim) if empty else obj.grad(w, BJ)
    g = lg.grad - g2
    a, residual = _floor_update(gamma * g, eps)
    w_new = w + _momentum(state, sched.alpha) - gamma * g2 - eps * a
    rec = {"t": t, "gamma": gamma, "eps": eps, "loss_S": math.nan,
           "lattice_sq": float(a @ a), "floor_residual_max": float(np.max(np.abs(residual), initial=0.0)),
           "batch_size": float(B.size), "prior_batch_size": float(BJ.size), "empty_prior_batch": float(empty)}
    _diff_columns(rec, g, gamma, eps=eps)
    return state.advance(w_new), rec


def step_rgd(state: OptState, obj, sched: Schedule, t: int, rng: np.random.Generator,
             split: IndexSplit | None = None):
    """Rounded GD ``W_t = W_{t-1} - eps round(gamma grad f(W_{t-1}, S) / eps)``.

    With a split, the record also carries the gradient difference the bound uses.
    """
    gamma, eps = sched.gamma[t - 1], sched.need("eps")[t - 1]
    w = state.w
    lg = obj.loss_grad(w)
    scaled = gamma * lg.grad / eps
    a = round_vec(scaled, rng)
    w_new = w - eps * a
    rec = {"t": t, "gamma": gamma, "eps": eps, "loss_S": lg.loss,
           "lattice_sq": float(a @ a), "floor_residual_max": float(np.max(np.abs(eps * (scaled - a)), initial=0.0))}
    if split is not None:
        _diff_columns(rec, lg.grad - _prior_grad(obj, w, split), gamma, eps=eps)
    return state.advance(w_new), rec


def _langevin_columns(rec, obj, w, split, gamma, sigma, full_grad):
    L_sq = float(np.max(obj.per_example_grad_norms(w)) ** 2)
    rec["Lw_sq"] = L_sq
    rec["Lw_sq_weighted"] = (gamma / sigma) ** 2 * L_sq
    if split is not None:
        _diff_columns(rec, full_grad - _prior_grad(obj, w, split), gamma, sigma=sigma)


def step_gld(state: OptState, obj, sched: Schedule, t: int, rng: np.random.Generator,
             split: IndexSplit | None = None):
    """Full-batch Langevin step ``W_t = W_{t-1} - gamma grad f(W_{t-1}, S) + sigma N(0, I)``."""
    gamma, sigma = sched.gamma[t - 1], sched.need("sigma")[t - 1]
    w = state.w
    lg = obj.loss_grad(w)
    noise = rng.standard_normal(obj.dim)
    w_new = w - gamma * lg.grad + sigma * noise
    rec = {"t": t, "gamma": gamma, "sigma": sigma, "loss_S": lg.loss}
    _langevin_columns(rec, obj, w, split, gamma, sigma, lg.grad)
    return state.advance(w_new), rec


def step_sgld(state: OptState, obj, split: IndexSplit, sched: Schedule, batch: BatchSpec, t: int,
              rng: np.random.Generator):
    """Stochastic Langevin step on a with-replacement batch of size ``b``."""
    if batch.mode is not BatchMode.WITH_REPLACEMENT:
        raise ValueError(f"SGLD draws batches with replacement, got mode {batch.mode.value}")
    gamma, sigma = sched.gamma[t - 1], sched.need("sigma")[t - 1]
    w = state.w
    B = sample_batch(split, batch, rng)
    gB = obj.grad(w, B)
    noise = rng.standard_normal(obj.dim)
    w_new = w - gamma * gB + sigma * noise
    lg = obj.loss_grad(w)
    dev = gB - lg.grad
    rec = {"t": t, "gamma": gamma, "sigma": sigma, "loss_S": lg.loss,
           "batch_size": float(B.size), "batch_grad_dev_sq": float(dev @ dev)}
    _langevin_columns(rec, obj, w, split, gamma, sigma, lg.grad)
    return state.advance(w_new), rec


def step_cld_em(state: OptState, obj, sched: Schedule, dt: float, t: int, rng: np.random.Generator,
                split: IndexSplit | None = None, horizon: float | None = None, loss_bound: float | None = None):
    """Euler-Maruyama step of ``dW = -(grad f + lambda W) dt + sqrt(2/beta) dB``.

    With a split and ``loss_bound`` (the constant ``C``), the record carries
    the left-endpoint quadrature term ``e^{alpha (t_left - horizon)} |g|^2 dt``
    with ``alpha = lambda / e^{8 beta C}``.
    """
    beta, lam = sched.beta, sched.lambda_reg
    if not (dt > 0 and beta is not None and beta > 0 and lam > 0):
        raise ValueError(f"CLD needs dt, beta and lambda_reg > 0, got dt={dt}, beta={beta}, lambda={lam}")
    w = state.w
    lg = obj.loss_grad(w)
    noise = rng.standard_normal(obj.dim)
    w_new = w - (lg.grad + lam * w) * dt + math.sqrt(2.0 * dt / beta) * noise
    rec = {"t": t, "loss_S": lg.loss}
    if split is not None:
        g = lg.grad - _prior_grad(obj, w, split)
        sq = float(g @ g)
        rec["grad_diff_sq"] = sq
        if loss_bound is not None:
            horizon = sched.T * dt if horizon is None else horizon
            alpha = lam / math.exp(8.0 * beta * loss_bound)
            rec["cld_quad"] = math.exp(alpha * ((t - 1) * dt - horizon)) * sq * dt
    L_sq = float(np.max(obj.per_example_grad_norms(w), initial=0.0) ** 2)
    rec["Lw_sq"] = L_sq
    return state.advance(w_new), rec


def step_gd(state: OptState, obj, sched: Schedule, t: int):
    """Plain (momentum) GD; the reference run for floored GD."""
    gamma = sched.gamma[t - 1]
    lg = obj.loss_grad(state.w)
    w_new = state.w + _momentum(state, sched.alpha) - gamma * lg.grad
    return state.advance(w_new), {"t": t, "gamma": gamma, "loss_S": lg.loss}


def step_sgd(state: OptState, obj, split: IndexSplit, sched: Schedule, batch: BatchSpec, t: int,
             rng: np.random.Generator):
    """Plain (momentum) SGD.  Batches are drawn exactly as in :func:`step_fsgd`."""
    gamma = sched.gamma[t - 1]
    B = sample_batch(split, batch, rng)
    lg = obj.loss_grad(state.w, B)
    w_new = state.w + _momentum(state, sched.alpha) - gamma * lg.grad
    return state.advance(w_new), {"t": t, "gamma": gamma, "batch_size": float(B.size)}


@dataclass(eq=False)
class TrajectoryLog:
    """Per-step records plus initial/final risks and run metadata.

    ``records`` has exactly ``T`` entries.  Risks are NaN on rows that were
    not evaluated (see ``eval_every``) and for objectives without a 0/1 risk.
    """

    algorithm: str
    records: list[dict]
    initial: dict
    final: dict
    metadata: dict
    final_params: np.ndarray
    snapshots: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def T(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        if name not in STEP_COLUMNS:
            raise KeyError(f"unknown column {name!r}")
        return np.array([r.get(name, math.nan) for r in self.records], dtype=float)

    def has(self, name: str) -> bool:
        col = self.column(name)
        return col.size > 0 and bool(np.all(np.isfinite(col)))

    def total(self, name: str) -> float:
        """``fsum`` of a column; raises if any step lacks the value."""
        col = self.column(name)
        if col.size and not np.all(np.isfinite(col)):
            raise KeyError(f"column {name!r} is missing at some steps")
        return math.fsum(col)

    def cumulative(self, name: str) -> np.ndarray:
        return np.cumsum(self.column(name))

    def sums(self) -> dict:
        out = {}
        for name in ("grad_diff_sq", "grad_diff_sq_weighted_eps", "grad_diff_sq_weighted_sigma",
                     "grad_diff_sq_weighted_gamma", "lattice_sq", "Lw_sq_weighted", "cld_quad",
                     "empty_prior_batch"):
            if self.has(name):
                out[name] = self.total(name)
        if self.has("Lw_sq"):
            out["Lw_max"] = float(math.sqrt(self.column("Lw_sq").max()))
        gam = self.column("gamma")
        sig = self.column("sigma")
        if self.T and np.all(np.isfinite(sig)):
            out["schedule_sum"] = math.fsum((gam / sig) ** 2)
        return out

    def summary(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "T": self.T,
            "initial": self.initial,
            "final": self.final,
            "sums": self.sums(),
            "metadata": self.metadata,
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(STEP_COLUMNS)
            for r in self.records:
                w.writerow([_fmt(r.get(c, math.nan)) for c in STEP_COLUMNS])

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(_jsonable(self.summary()), indent=2, sort_keys=True) + "\n")

    def save(self, prefix) -> tuple[Path, Path]:
        """Write ``<prefix>.csv`` and ``<prefix>.json``; the JSON embeds the final parameters."""
        prefix = Path(prefix)
        csv_path, json_path = prefix.with_suffix(".csv"), prefix.with_suffix(".json")
        self.to_csv(csv_path)
        summary = self.summary()
        summary["final_params"] = [float(v) for v in self.final_params]
        json_path.write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
        return csv_path, json_path

    @classmethod
    def load(cls, prefix) -> "TrajectoryLog":
        prefix = Path(prefix)
        summary = json.loads(prefix.with_suffix(".json").read_text())
        records = []
        with open(prefix.with_suffix(".csv"), newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                rec = {k: float(v) for k, v in row.items() if v not in ("", "nan")}
                rec["t"] = int(rec["t"])
                records.append(rec)
        return cls(summary["algorithm"], records, summary["initial"], summary["final"],
                   summary["metadata"], np.asarray(summary.get("final_params", []), dtype=float))


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, enum.Enum):
        return obj.value
    return obj


def _risks(obj, w, split, test_obj) -> dict:
    out = {"train_risk_S": obj.risk(w)}
    if split is not None:
        out["train_risk_I"] = obj.risk(w, split.I)
        out["train_risk_J"] = obj.risk(w, split.J) if split.m else math.nan
    if test_obj is not None:
        out["test_risk"] = test_obj.risk(w)
    return out


def run(algorithm, obj, sched: Schedule, split: IndexSplit | None = None, *, w0=None, seed=0,
        batch: BatchSpec | None = None, dt: float | None = None, loss_bound: float | None = None,
        test_obj=None, eval_every: int = 0, snapshot_every: int = 0, metadata: dict | None = None) -> TrajectoryLog:
    """Run ``sched.T`` steps of ``algorithm`` from ``w0``.

    Risks are evaluated at the start, every ``eval_every`` steps (never when
    0) and always at the end.  For CLD without ``w0`` the start is drawn from
    ``N(0, I / (lambda beta))``.  ``seed`` (int or Generator) drives batches,
    noise and rounding coins; the initial point is not drawn from it unless
    CLD has to sample one.
    """
    algo = Algorithm(algorithm)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    needs_split = algo in (Algorithm.FGD, Algorithm.FSGD, Algorithm.SGLD, Algorithm.SGD)
    if needs_split and split is None:
        raise ValueError(f"{algo.value} needs a prior/complement split")
    if algo in (Algorithm.FSGD, Algorithm.SGLD, Algorithm.SGD) and batch is None:
        raise ValueError(f"{algo.value} needs a batch spec")
    if algo is Algorithm.CLD and dt is None:
        raise ValueError("cld needs a step size dt")
    if split is not None and split.n != obj.n:
        raise ValueError(f"split is over n={split.n} points, objective has {obj.n}")

    if w0 is None:
        if algo is not Algorithm.CLD:
            raise ValueError(f"{algo.value} needs an initial point w0")
        if not (sched.beta and sched.lambda_reg > 0):
            raise ValueError("cld initialisation needs beta and lambda_reg > 0")
        w0 = rng.standard_normal(obj.dim) / math.sqrt(sched.lambda_reg * sched.beta)
    state = OptState.start(w0)
    if state.w.shape != (obj.dim,):
        raise ValueError(f"w0 has shape {state.w.shape}, objective dimension is {obj.dim}")

    prior_mask = split.in_prior() if split is not None else None
    horizon = sched.T * dt if dt is not None else None
    initial = _risks(obj, state.w, split, test_obj)
    records, snapshots = [], {}
    if snapshot_every:
        snapshots[0] = state.w.copy()

    for t in range(1, sched.T + 1):
        try:
            if algo is Algorithm.FGD:
                state, rec = step_fgd(state, obj, split, sched, t)
            elif algo is Algorithm.FSGD:
                state, rec = step_fsgd(state, obj, split, sched, batch, t, rng, prior_mask)
            elif algo is Algorithm.RGD:
                state, rec = step_rgd(state, obj, sched, t, rng, split)
            elif algo is Algorithm.GLD:
                state, rec = step_gld(state, obj, sched, t, rng, split)
            elif algo is Algorithm.SGLD:
                state, rec = step_sgld(state, obj, split, sched, batch, t, rng)
            elif algo is Algorithm.CLD:
                state, rec = step_cld_em(state, obj, sched, dt, t, rng, split, horizon, loss_bound)
            elif algo is Algorithm.GD:
                state, rec = step_gd(state, obj, sched, t)
            else:
                state, rec = step_sgd(state, obj, split, sched, batch, t, rng)
            if not np.all(np.isfinite(state.w)):
                raise FloatingPointError("parameters became non-finite")
            if t == sched.T or (eval_every and t % eval_every == 0):
                rec.update(_risks(obj, state.w, split, test_obj))
        except StepError:
            raise
        except Exception as exc:
            raise StepError(t, exc) from exc
        records.append(rec)
        if snapshot_every and t % snapshot_every == 0:
            snapshots[t] = state.w.copy()

    final = _risks(obj, state.w, split, test_obj)
    final["loss_S"] = obj.loss(state.w)
    meta = {
        "algorithm": algo.value,
        "seed": seed if isinstance(seed, (int, np.integer)) else None,
        "rng": GAUSSIAN_ALGORITHM,
        "d": obj.dim,
        "n": obj.n,
        "m": split.m if split is not None else None,
        "T": sched.T,
        "alpha": sched.alpha,
        "batch_size": batch.size if batch is not None else None,
        "batch_mode": batch.mode.value if batch is not None else None,
        "dt": dt,
        "horizon": horizon,
        "beta": sched.beta,
        "lambda_reg": sched.lambda_reg,
        "loss_bound": loss_bound,
        "eps_values": sorted({float(v) for v in sched.eps[: sched.T]}) if sched.eps is not None else None,
    }
    if metadata:
        meta.update(metadata)
    return TrajectoryLog(algo.value, records, initial, final, meta, state.w.copy(), snapshots)
