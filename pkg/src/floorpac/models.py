"""Small differentiable classifiers with hand-derived gradients.

Parameters live in one flat float64 vector.  Layer ``l`` contributes its
weight matrix ``W_l`` (shape ``out x in``, row-major) followed by its bias
``b_l``.  The training surrogate is mean cross-entropy; the certified risk is
the 0/1 error of the argmax prediction.

Besides the raw functions, three objective classes expose the interface the
optimizers use (``grad``, ``loss``, ``per_example_grad_norms``, ``risk``):
:class:`ModelObjective` for a classifier on a dataset,
:class:`QuadraticObjective` for ``f(w, z) = |w - z|^2 / 2`` and
:class:`ZeroObjective` for pure-noise dynamics.
"""

from __future__ import annotations

import enum
import json
import math
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datasets import Dataset

__all__ = [
    "GradEval",
    "ModelArch",
    "ModelKind",
    "ModelObjective",
    "QuadraticObjective",
    "ZeroObjective",
    "init_params",
    "load_params",
    "logits",
    "loss_grad",
    "per_example_grad_norm_max",
    "per_example_grad_norms",
    "per_example_grads",
    "save_params",
    "unpack",
    "zero_one_risk",
]

CHECKPOINT_MAGIC = "floorpac-params"


class ModelKind(str, enum.Enum):
    LINEAR_SOFTMAX = "linear_softmax"
    MLP = "mlp"


@dataclass(frozen=True)
class ModelArch:
    kind: ModelKind
    input_dim: int
    num_classes: int
    hidden: tuple[int, ...] = ()
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1 or self.num_classes < 2:
            raise ValueError(f"need input_dim >= 1 and num_classes >= 2, got {self.input_dim}, {self.num_classes}")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")
        if self.kind is ModelKind.LINEAR_SOFTMAX and self.hidden:
            raise ValueError("a linear softmax model has no hidden layers")
        if self.kind is ModelKind.MLP and not self.hidden:
            raise ValueError("an MLP needs at least one hidden layer")
        if any(h < 1 for h in self.hidden):
            raise ValueError(f"hidden widths must be positive, got {self.hidden}")

    @classmethod
    def linear(cls, input_dim: int, num_classes: int) -> "ModelArch":
        return cls(ModelKind.LINEAR_SOFTMAX, input_dim, num_classes)

    @classmethod
    def mlp(cls, input_dim: int, num_classes: int, hidden) -> "ModelArch":
        return cls(ModelKind.MLP, input_dim, num_classes, tuple(hidden))

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        """``(fan_in, fan_out)`` per layer."""
        widths = [self.input_dim, *self.hidden, self.num_classes]
        return list(zip(widths[:-1], widths[1:]))

    @property
    def num_params(self) -> int:
        return sum(o * i + o for i, o in self.layer_dims)

    def as_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "input_dim": self.input_dim,
            "num_classes": self.num_classes,
            "hidden": list(self.hidden),
            "activation": self.activation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelArch":
        return cls(d["kind"], int(d["input_dim"]), int(d["num_classes"]),
                   tuple(d.get("hidden", ())), d.get("activation", "relu"))


@dataclass(frozen=True)
class GradEval:
    loss: float
    grad: np.ndarray


def _check_params(arch: ModelArch, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (arch.num_params,):
        raise ValueError(f"parameter vector has shape {w.shape}, arch needs ({arch.num_params},)")
    return w


def unpack(arch: ModelArch, w) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views ``(W_l, b_l)`` into the flat vector ``w``."""
    w = _check_params(arch, w)
    out, pos = [], 0
    for fan_in, fan_out in arch.layer_dims:
        W = w[pos:pos + fan_out * fan_in].reshape(fan_out, fan_in)
        pos += fan_out * fan_in
        b = w[pos:pos + fan_out]
        pos += fan_out
        out.append((W, b))
    return out


def init_params(arch: ModelArch, seed) -> np.ndarray:
    """Uniform on ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` for weights and biases alike."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    parts = []
    for fan_in, fan_out in arch.layer_dims:
        scale = 1.0 / math.sqrt(fan_in)
        parts.append(rng.uniform(-scale, scale, size=fan_out * fan_in + fan_out))
    return np.concatenate(parts)


def _forward(arch, w, X):
    layers = unpack(arch, w)
    acts, masks = [X], []
    a = X
    for W, b in layers[:-1]:
        z = a @ W.T + b
        mask = z > 0
        a = np.where(mask, z, 0.0)
        acts.append(a)
        masks.append(mask)
    W, b = layers[-1]
    return a @ W.T + b, layers, acts, masks


def _log_softmax(z: np.ndarray) -> np.ndarray:
    s = z - z.max(axis=1, keepdims=True)
    return s - np.log(np.exp(s).sum(axis=1, keepdims=True))


def _nonempty(data: Dataset) -> None:
    if data.n == 0:
        raise ValueError("empty dataset view")


def logits(arch: ModelArch, w, data: Dataset) -> np.ndarray:
    return _forward(arch, w, data.features)[0]


def _output_deltas(arch, w, data):
    """Forward pass plus per-example ``d loss_i / d logits``."""
    z, layers, acts, masks = _forward(arch, w, data.features)
    logp = _log_softmax(z)
    rows = np.arange(data.n)
    delta = np.exp(logp)
    delta[rows, data.labels] -= 1.0
    return -logp[rows, data.labels], delta, layers, acts, masks


def _backprop(delta, layers, acts, masks):
    """Yield ``(layer index, delta, input activation)`` from the top layer down."""
    for l in range(len(layers) - 1, -1, -1):
        yield l, delta, acts[l]
        if l > 0:
            delta = (delta @ layers[l][0]) * masks[l - 1]


def loss_grad(arch: ModelArch, w, data: Dataset) -> GradEval:
    """Mean cross-entropy over ``data`` and its exact gradient."""
    _nonempty(data)
    losses, delta, layers, acts, masks = _output_deltas(arch, w, data)
    delta = delta / data.n
    grads = [None] * len(layers)
    for l, dl, a in _backprop(delta, layers, acts, masks):
        grads[l] = np.concatenate([(dl.T @ a).ravel(), dl.sum(axis=0)])
    return GradEval(float(losses.mean()), np.concatenate(grads))


def per_example_grads(arch: ModelArch, w, data: Dataset) -> np.ndarray:
    """``(n, d)`` matrix whose row ``i`` is the gradient of the loss at example ``i``."""
    _nonempty(data)
    _, delta, layers, acts, masks = _output_deltas(arch, w, data)
    blocks = [None] * len(layers)
    for l, dl, a in _backprop(delta, layers, acts, masks):
        outer = np.einsum("no,ni->noi", dl, a).reshape(data.n, -1)
        blocks[l] = np.concatenate([outer, dl], axis=1)
    return np.concatenate(blocks, axis=1)


def per_example_grad_norms(arch: ModelArch, w, data: Dataset) -> np.ndarray:
    """Euclidean norm of every per-example gradient.

    Each layer block is ``[delta a^T, delta]`` so its squared norm is
    ``|delta|^2 (|a|^2 + 1)``; no ``(n, d)`` matrix is formed.
    """
    _nonempty(data)
    _, delta, layers, acts, masks = _output_deltas(arch, w, data)
    sq = np.zeros(data.n)
    for _, dl, a in _backprop(delta, layers, acts, masks):
        sq += np.einsum("no,no->n", dl, dl) * (np.einsum("ni,ni->n", a, a) + 1.0)
    return np.sqrt(sq)


def per_example_grad_norm_max(arch: ModelArch, w, data: Dataset) -> float:
    """``L(w) = max_i |grad f(w, z_i)|``."""
    return float(per_example_grad_norms(arch, w, data).max())


def zero_one_risk(arch: ModelArch, w, data: Dataset) -> float:
    _nonempty(data)
    pred = np.argmax(logits(arch, w, data), axis=1)
    return float(np.mean(pred != data.labels))


def save_params(path, arch: ModelArch, w, seed: int | None = None) -> None:
    """One JSON header line, then ``d`` little-endian float64 values."""
    w = _check_params(arch, w)
    header = {"format": CHECKPOINT_MAGIC, "version": 1, "arch": arch.as_dict(),
              "d": int(w.size), "seed": seed}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(w.astype("<f8").tobytes())


def load_params(path) -> tuple[ModelArch, np.ndarray, dict]:
    raw = Path(path).read_bytes()
    cut = raw.find(b"\n")
    if cut < 0:
        raise ValueError(f"{path}: missing checkpoint header")
    header = json.loads(raw[:cut])
    if header.get("format") != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a parameter checkpoint")
    arch = ModelArch.from_dict(header["arch"])
    body = raw[cut + 1:]
    if len(body) != 8 * header["d"] or header["d"] != arch.num_params:
        raise ValueError(f"{path}: expected {header['d']} float64 values, found {len(body) / 8:g}")
    return arch, np.frombuffer(body, dtype="<f8").astype(float), header


class _SubsetCache:
    # A handful of index sets (S_J, S_I, test) are reused every step.
    def __init__(self, data: Dataset, size: int = 8):
        self.data = data
        self.size = size
        self._store: OrderedDict[bytes, Dataset] = OrderedDict()

    def view(self, idx) -> Dataset:
        if idx is None:
            return self.data
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size > 256:
            key = idx.tobytes()
            hit = self._store.get(key)
            if hit is not None:
                self._store.move_to_end(key)
                return hit
            view = self.data.take(idx)
            self._store[key] = view
            if len(self._store) > self.size:
                self._store.popitem(last=False)
            return view
        return self.data.take(idx)


class ModelObjective:
    """A classifier evaluated on subsets of a fixed dataset."""

    def __init__(self, arch: ModelArch, data: Dataset):
        if data.input_dim != arch.input_dim or data.num_classes != arch.num_classes:
            raise ValueError("dataset shape does not match the model architecture")
        self.arch = arch
        self.data = data
        self._cache = _SubsetCache(data)

    @property
    def dim(self) -> int:
        return self.arch.num_params

    @property
    def n(self) -> int:
        return self.data.n

    def loss_grad(self, w, idx=None) -> GradEval:
        return loss_grad(self.arch, w, self._cache.view(idx))

    def grad(self, w, idx=None) -> np.ndarray:
        return self.loss_grad(w, idx).grad

    def loss(self, w, idx=None) -> float:
        return self.loss_grad(w, idx).loss

    def per_example_grads(self, w, idx=None) -> np.ndarray:
        return per_example_grads(self.arch, w, self._cache.view(idx))

    def per_example_grad_norms(self, w, idx=None) -> np.ndarray:
        return per_example_grad_norms(self.arch, w, self._cache.view(idx))

    def risk(self, w, idx=None) -> float:
        return zero_one_risk(self.arch, w, self._cache.view(idx))


class QuadraticObjective:
    """``f(w, z_i) = |w - z_i|^2 / 2``; the mean gradient is ``w - mean(z)``.

    There is no classification risk, so :meth:`risk` returns NaN.
    """

    def __init__(self, targets):
        self.targets = np.asarray(targets, dtype=float)
        if self.targets.ndim != 2 or self.targets.shape[0] == 0:
            raise ValueError("targets must be a non-empty (n, d) array")

    @property
    def dim(self) -> int:
        return self.targets.shape[1]

    @property
    def n(self) -> int:
        return self.targets.shape[0]

    def _rows(self, idx):
        z = self.targets if idx is None else self.targets[np.asarray(idx, dtype=np.int64)]
        if z.shape[0] == 0:
            raise ValueError("empty dataset view")
        return z

    def grad(self, w, idx=None) -> np.ndarray:
        return np.asarray(w, dtype=float) - self._rows(idx).mean(axis=0)

    def loss(self, w, idx=None) -> float:
        diff = np.asarray(w, dtype=float) - self._rows(idx)
        return 0.5 * float(np.mean(np.einsum("nd,nd->n", diff, diff)))

    def loss_grad(self, w, idx=None) -> GradEval:
        return GradEval(self.loss(w, idx), self.grad(w, idx))

    def per_example_grads(self, w, idx=None) -> np.ndarray:
        return np.asarray(w, dtype=float) - self._rows(idx)

    def per_example_grad_norms(self, w, idx=None) -> np.ndarray:
        return np.linalg.norm(self.per_example_grads(w, idx), axis=1)

    def risk(self, w, idx=None) -> float:
        return math.nan


class ZeroObjective:
    """``f = 0`` in dimension ``dim``; Langevin dynamics on it is an OU process."""

    def __init__(self, dim: int, n: int = 1):
        self._dim, self._n = int(dim), int(n)

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def n(self) -> int:
        return self._n

    def grad(self, w, idx=None) -> np.ndarray:
        return np.zeros(self._dim)

    def loss(self, w, idx=None) -> float:
        return 0.0

    def loss_grad(self, w, idx=None) -> GradEval:
        return GradEval(0.0, np.zeros(self._dim))

    def per_example_grads(self, w, idx=None) -> np.ndarray:
        rows = self._n if idx is None else len(idx)
        return np.zeros((rows, self._dim))

    def per_example_grad_norms(self, w, idx=None) -> np.ndarray:
        return np.zeros(self._n if idx is None else len(idx))

    def risk(self, w, idx=None) -> float:
        return math.nan
