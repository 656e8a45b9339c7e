"""Lattice primitives behind the discrete data-dependent prior.

Two different integer maps live here and they are deliberately named apart:

* :func:`floor_vec` is the sign-magnitude floor (truncation toward zero)
  used by floored gradient descent.
* :func:`round_vec` is the fair-coin stochastic rounding ``floor(x) + R``
  used by rounded gradient descent, built on the ordinary floor toward
  minus infinity.

The prior noise ``xi`` on ``Z^d`` has independent coordinates with
``Pr[a] = p^{a^2} / Z(p)``, ``Z(p) = sum_{i in Z} p^{i^2}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GridNoiseSpec",
    "default_p",
    "floor_vec",
    "log_xi_normalizer",
    "per_step_kl_bound",
    "per_step_kl_exact",
    "round_vec",
    "truncation_radius",
    "xi_log_pmf",
    "xi_marginal_pmf",
    "xi_normalizer",
    "xi_sample",
]

_TAIL = 1e-16


def _check_p(p: float) -> float:
    p = float(p)
    if not (0.0 < p < 1.0 / 3.0):
        raise ValueError(f"p must lie in (0, 1/3), got {p}")
    return p


def _finite_array(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite components")
    return x


def truncation_radius(p: float) -> int:
    """Smallest ``r >= 1`` with ``p^{r^2} < 1e-16``."""
    p = _check_p(p)
    r = 1
    while r * r * math.log(p) >= math.log(_TAIL):
        r += 1
    return r


def _half_series(p: float) -> float:
    # sum_{i >= 1} p^{i^2}, summed smallest-first
    r = truncation_radius(p)
    terms = [p ** (i * i) for i in range(1, r + 1)]
    return math.fsum(reversed(terms))


def xi_normalizer(p: float) -> float:
    """``Z(p) = sum_{i in Z} p^{i^2}``."""
    return 1.0 + 2.0 * _half_series(p)


def log_xi_normalizer(p: float) -> float:
    """``ln Z(p)``, accurate for tiny ``p`` (it behaves like ``2p``)."""
    return math.log1p(2.0 * _half_series(p))


@dataclass(frozen=True)
class GridNoiseSpec:
    p: float
    d: int
    truncation_radius: int = field(default=0)

    def __post_init__(self):
        _check_p(self.p)
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d}")
        r = truncation_radius(self.p)
        if self.truncation_radius == 0:
            object.__setattr__(self, "truncation_radius", r)
        elif self.truncation_radius < r:
            raise ValueError(f"truncation_radius {self.truncation_radius} below the required {r}")

    @property
    def log_inv_p(self) -> float:
        return -math.log(self.p)

    @property
    def log_normalizer(self) -> float:
        """``d * ln Z(p)``."""
        return self.d * log_xi_normalizer(self.p)


def floor_vec(x) -> np.ndarray:
    """Sign-magnitude floor: ``floor(x)`` for ``x >= 0``, ``-floor(-x)`` otherwise."""
    x = _finite_array(x)
    return np.trunc(x).astype(np.int64)


def round_vec(x, rng: np.random.Generator) -> np.ndarray:
    """Stochastic rounding ``floor(x) + R`` with independent fair coins ``R``."""
    x = _finite_array(x)
    coins = rng.integers(0, 2, size=x.shape)
    return np.floor(x).astype(np.int64) + coins


def _check_dim(a, spec: GridNoiseSpec) -> np.ndarray:
    a = np.asarray(a)
    if a.shape[-1] != spec.d:
        raise ValueError(f"lattice point has dimension {a.shape[-1]}, spec expects {spec.d}")
    return a


def xi_log_pmf(a, spec: GridNoiseSpec):
    """``ln Pr[xi = a]``; vectorised over leading axes of ``a``."""
    a = _check_dim(a, spec).astype(float)
    sq = np.sum(a * a, axis=-1)
    out = -spec.log_normalizer - spec.log_inv_p * sq
    return float(out) if np.ndim(out) == 0 else out


def per_step_kl_exact(a, spec: GridNoiseSpec):
    """KL of one floored step against the prior step: ``ln(1 / Pr[xi = a])``."""
    return -xi_log_pmf(a, spec)


def per_step_kl_bound(grad_diff, gamma: float, eps: float, spec: GridNoiseSpec) -> float:
    """``3dp + ln(1/p) (gamma/eps)^2 ||grad_diff||^2``; dominates the exact KL."""
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    g = _finite_array(grad_diff)
    return 3.0 * spec.d * spec.p + spec.log_inv_p * (gamma / eps) ** 2 * float(g @ g)


def xi_marginal_pmf(spec: GridNoiseSpec) -> tuple[np.ndarray, np.ndarray]:
    """Lattice support ``[-r, r]`` and the renormalised 1-D marginal on it."""
    r = spec.truncation_radius
    support = np.arange(-r, r + 1)
    logw = -spec.log_inv_p * support.astype(float) ** 2
    w = np.exp(logw - logw.max())
    return support, w / w.sum()


def xi_sample(spec: GridNoiseSpec, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw ``xi`` by inverse CDF over the truncated 1-D lattice, coordinatewise."""
    support, pmf = xi_marginal_pmf(spec)
    cdf = np.cumsum(pmf)
    cdf[-1] = 1.0
    shape = (spec.d,) if size is None else (size, spec.d)
    u = rng.random(shape)
    return support[np.searchsorted(cdf, u, side="right")]


def default_p(T: int, d: int) -> float:
    """``p = 1/(T d)``, which turns ``3 T d p`` into the constant 3."""
    if T < 1 or d < 1:
        raise ValueError(f"T and d must be positive, got T={T}, d={d}")
    if T * d <= 3:
        raise ValueError(f"T*d = {T * d} <= 3 gives p >= 1/3")
    return 1.0 / (T * d)
