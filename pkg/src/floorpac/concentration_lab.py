"""Exact and Monte Carlo checks of the supporting lemmas.

Every verifier returns a :class:`VerificationReport`.  Exact checks use an
absolute slack of ``1e-12``; Monte Carlo checks compare an empirical frequency
(or mean) with the claimed value plus four binomial (or sample) standard
deviations.  Each verifier owns its random stream.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import scalar_bounds as sb
from .datasets import Dataset, IndexSplit, sample_prior_indices, synth_blobs
from .discrete_noise import GridNoiseSpec, default_p, per_step_kl_bound, per_step_kl_exact
from .models import ModelArch, ModelObjective, ZeroObjective, init_params
from .optimizers import OptState, Schedule, run, step_fgd

__all__ = [
    "SUITE",
    "VerificationReport",
    "brute_force_variance_wor",
    "duplicate_data_path",
    "exact_variance_wor",
    "frozen_langevin_path",
    "general_variance_wor",
    "run_suite",
    "stacked_functional",
    "verify_catoni_mmt",
    "verify_cld_grad_integral",
    "verify_data_pac_end_to_end",
    "verify_fgd_kl_pathwise",
    "verify_kl_chain_rule",
    "verify_mcdiarmid_wor",
    "verify_norm_subgaussian",
    "verify_ou_stationary",
    "verify_prob_eexp",
    "verify_variance_wor",
]

EXACT_SLACK = 1e-12
SIGMAS = 4.0


@dataclass
class VerificationReport:
    lemma_id: str
    claim: object
    observed: object
    trials: int
    slack: str
    passed: bool
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.lemma_id}: trials={self.trials} slack={self.slack}"

    def as_dict(self) -> dict:
        def clean(x):
            if isinstance(x, dict):
                return {str(k): clean(v) for k, v in x.items()}
            if isinstance(x, (list, tuple, np.ndarray)):
                return [clean(v) for v in np.asarray(x, dtype=object).tolist()] if isinstance(x, np.ndarray) \
                    else [clean(v) for v in x]
            if isinstance(x, (np.floating, float)):
                return float(x) if math.isfinite(x) else str(float(x))
            if isinstance(x, (np.integer,)):
                return int(x)
            if isinstance(x, np.bool_):
                return bool(x)
            return x
        return clean({"lemma_id": self.lemma_id, "claim": self.claim, "observed": self.observed,
                      "trials": self.trials, "slack": self.slack, "pass": self.passed, "details": self.details})


def _binom_sigma(p: float, trials: int) -> float:
    p = min(max(p, 0.0), 1.0)
    return math.sqrt(p * (1.0 - p) / trials)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


# ---------------------------------------------------------------- variance

def exact_variance_wor(gradients, m: int) -> float:
    """``E_J |mean_J g - mean g|^2`` for ``m`` indices drawn without replacement.

    Closed form ``(sbar^2/m) (n-m)/(n-1)`` with ``sbar^2`` the mean squared norm
    of the centred vectors.
    """
    g = np.atleast_2d(np.asarray(gradients, dtype=float))
    n = g.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    if m == n:
        return 0.0
    c = g - g.mean(axis=0)
    sbar2 = float(np.einsum("nd,nd->", c, c)) / n
    return sbar2 / m * (n - m) / (n - 1)


def general_variance_wor(gradients, m: int) -> float:
    """``E_J |mean_J g|^2`` without centring:
    ``(1/m) mean|g|^2 + (m-1)/(m n (n-1)) (|sum g|^2 - sum |g|^2)``."""
    g = np.atleast_2d(np.asarray(gradients, dtype=float))
    n = g.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    sq = float(np.einsum("nd,nd->", g, g))
    first = sq / (n * m)
    if n == 1:
        return first
    total = g.sum(axis=0)
    return first + (m - 1) / (m * n * (n - 1)) * (float(total @ total) - sq)


def brute_force_variance_wor(gradients, m: int, centered: bool = True) -> float:
    g = np.atleast_2d(np.asarray(gradients, dtype=float))
    n = g.shape[0]
    ref = g.mean(axis=0) if centered else np.zeros(g.shape[1])
    vals = []
    for J in itertools.combinations(range(n), m):
        diff = g[list(J)].mean(axis=0) - ref
        vals.append(float(diff @ diff))
    return math.fsum(vals) / len(vals)


def verify_variance_wor(max_n: int = 8, dim: int = 3, seed=0) -> VerificationReport:
    """Closed form and two-term formula against enumeration for every ``m <= n <= max_n``."""
    rng = _rng(seed)
    worst, worst_general, bound_ok, cases = 0.0, 0.0, True, 0
    for n in range(1, max_n + 1):
        for m in range(1, n + 1):
            g = rng.normal(size=(n, dim))
            exact = exact_variance_wor(g, m)
            worst = max(worst, abs(exact - brute_force_variance_wor(g, m)))
            worst_general = max(worst_general,
                                abs(general_variance_wor(g, m) - brute_force_variance_wor(g, m, centered=False)))
            L = float(np.max(np.linalg.norm(g, axis=1)))
            bound_ok &= exact <= 4 * L * L / m + EXACT_SLACK
            cases += 1
    passed = worst <= EXACT_SLACK and worst_general <= EXACT_SLACK and bound_ok
    return VerificationReport("variance-wor", "closed form == enumeration, <= 4L^2/m",
                              {"max_abs_err": worst, "max_abs_err_general": worst_general, "bound_ok": bound_ok},
                              cases, f"{EXACT_SLACK:g} absolute", passed)


# ---------------------------------------------------------------- sampling helpers

def _draw_wor(rng, n: int, m: int, count: int) -> np.ndarray:
    """``count`` rows of ``m`` distinct indices from ``[0, n)``, each row uniform."""
    keys = rng.random((count, n))
    return np.argpartition(keys, m - 1, axis=1)[:, :m] if m < n else np.argsort(keys, axis=1)


def _chunks(total: int, size: int):
    done = 0
    while done < total:
        k = min(size, total - done)
        yield k
        done += k


def stacked_functional(H: np.ndarray):
    """``Phi(J) = |mean_J H - mean H|`` over the rows of ``H``.

    Returns ``(phi, c_of)``.  Swapping one index moves ``mean_J H`` by
    ``(H_b - H_a) / m``, so ``c_of(m) = 2 max_i |H_i - mean H| / m`` is a valid
    bounded-difference constant.
    """
    H = np.asarray(H, dtype=float)
    mu = H.mean(axis=0)

    def phi(J):
        J = np.asarray(J)
        return np.linalg.norm(H[J].mean(axis=-2) - mu, axis=-1)

    def c_of(m: int) -> float:
        return 2.0 * float(np.max(np.linalg.norm(H - mu, axis=1))) / m

    return phi, c_of


# ---------------------------------------------------------------- modified McDiarmid

def mcdiarmid_tail(eps, m: int, c: float, n: int | None = None, tight: bool = False, constant: float = 2.0):
    """``exp(-2 eps^2 / (m c^2))``; the tight form replaces ``m`` by ``sum_i ((n-i-1)/(n-i))^2``."""
    eps = np.asarray(eps, dtype=float)
    if c == 0:
        return np.where(eps > 0, 0.0, 1.0)
    if tight:
        if n is None or m >= n:
            raise ValueError("the tight form needs n > m")
        i = np.arange(1, m + 1)
        denom = c * c * float(np.sum(((n - i - 1) / (n - i)) ** 2))
    else:
        denom = m * c * c
    if denom == 0:
        return np.where(eps > 0, 0.0, 1.0)
    return np.exp(-constant * eps**2 / denom)


def verify_mcdiarmid_wor(phi, n: int, m: int, c: float, eps_grid, trials: int = 100_000, seed=0,
                         mean: float | None = None, tight: bool = False, checks: int = 200,
                         tail_constant: float = 2.0, label: str = "new-mcd") -> VerificationReport:
    """Tail of an order-independent ``phi`` over ``m`` indices drawn without replacement.

    ``phi`` maps an ``(..., m)`` index array to ``(...)`` values.  It is first
    probed for order independence and for the bounded-difference constant
    ``c``; a violation fails the report with a witness.  ``mean`` is the exact
    expectation when known, otherwise it is estimated on an independent batch
    of ``trials`` draws.
    """
    rng = _rng(seed)
    eps_grid = np.asarray(eps_grid, dtype=float)
    slack = f"{SIGMAS:g} binomial sigma"

    probes = _draw_wor(rng, n, m, checks)
    base = np.asarray(phi(probes), dtype=float)
    shuffled = rng.permuted(probes, axis=1)
    order_gap = np.abs(np.asarray(phi(shuffled)) - base)
    scale = 1e-9 * max(1.0, float(np.max(np.abs(base))))
    if np.any(order_gap > scale):
        k = int(np.argmax(order_gap))
        return VerificationReport(label, "order independence", float(order_gap[k]), checks, slack, False,
                                  {"witness": [probes[k].tolist(), shuffled[k].tolist()]})
    swapped = probes.copy()
    for r in range(checks):
        outside = np.setdiff1d(np.arange(n), probes[r])
        if outside.size:
            swapped[r, rng.integers(m)] = rng.choice(outside)
    jumps = np.abs(np.asarray(phi(swapped)) - base)
    if np.any(jumps > c * (1 + 1e-9) + 1e-15):
        k = int(np.argmax(jumps))
        return VerificationReport(label, f"bounded difference c={c}", float(jumps[k]), checks, slack, False,
                                  {"witness": [probes[k].tolist(), swapped[k].tolist()]})

    def sample(count):
        out = np.empty(count)
        pos = 0
        for k in _chunks(count, 10_000):
            out[pos:pos + k] = phi(_draw_wor(rng, n, m, k))
            pos += k
        return out

    mean_source = "exact"
    if mean is None:
        mean = float(sample(trials).mean())
        mean_source = "independent batch"
    vals = sample(trials)
    emp = np.array([np.mean(vals - mean > e) for e in eps_grid])
    claim = mcdiarmid_tail(eps_grid, m, c, n, tight, tail_constant)
    limit = claim + SIGMAS * np.array([_binom_sigma(p, trials) for p in claim])
    passed = bool(np.all(emp <= limit))
    return VerificationReport(label + (" (tight)" if tight else ""), claim.tolist(), emp.tolist(), trials, slack,
                              passed, {"eps": eps_grid.tolist(), "c": c, "n": n, "m": m, "mean": mean,
                                       "mean_source": mean_source, "max_bounded_difference_seen": float(jumps.max())})


def frozen_langevin_path(n: int = 100, T: int = 20, seed=0, gamma: float = 0.1, sigma: float = 0.05,
                         input_dim: int = 2, num_classes: int = 3):
    """Per-example gradients along a GLD path on blobs (the path never sees ``J``).

    Returns ``(G, weights)`` with ``G`` of shape ``(T, n, d)`` holding the
    gradients at ``W_0 .. W_{T-1}`` and ``weights = (gamma/sigma)^2``.
    """
    rng = _rng(seed)
    data = synth_blobs(n, input_dim, num_classes, 3.0, rng)
    arch = ModelArch.linear(input_dim, num_classes)
    obj = ModelObjective(arch, data)
    sched = Schedule.constant(T, gamma, sigma=sigma)
    log = run("gld", obj, sched, None, w0=init_params(arch, rng), seed=rng, snapshot_every=1)
    G = np.stack([obj.per_example_grads(log.snapshots[t]) for t in range(T)])
    return G, (sched.gamma[:T] / sched.sigma[:T]) ** 2


def _stack(G: np.ndarray, weights) -> np.ndarray:
    # rows H_i = concat_t sqrt(w_t) G[t, i]
    w = np.sqrt(np.asarray(weights, dtype=float))[:, None, None]
    return np.transpose(G * w, (1, 0, 2)).reshape(G.shape[1], -1)


# ---------------------------------------------------------------- norm-subGaussian

def verify_norm_subgaussian(G, m: int, T: int, d: int, eps_grid=None, trials: int = 100_000, seed=0,
                            c: float = 1.7) -> VerificationReport:
    """With-replacement tail of ``|mean_J G - mu|^2`` against ``2Td exp(-eps m / (6.3 L^2))``.

    ``G`` holds the ``n`` stacked vectors (rows of length ``T d``), already
    weighted.  Also checks the single-draw tail
    ``Pr[|G_J1 - mu| >= eps] <= 2 exp(-eps^2 / (2 c^2 L^2))``.
    """
    rng = _rng(seed)
    G = np.asarray(G, dtype=float)
    n = G.shape[0]
    if G.shape[1] != T * d:
        raise ValueError(f"stacked vectors have length {G.shape[1]}, expected T*d = {T * d}")
    mu = G.mean(axis=0)
    L = float(np.max(np.linalg.norm(G, axis=1)))
    if eps_grid is None:
        eps_grid = np.linspace(0.0, 3.0, 13) * L * L / m
    eps_grid = np.asarray(eps_grid, dtype=float)
    sq = np.empty(trials)
    pos = 0
    for k in _chunks(trials, 5000):
        J = rng.integers(0, n, size=(k, m))
        diff = G[J].mean(axis=1) - mu
        sq[pos:pos + k] = np.einsum("kd,kd->k", diff, diff)
        pos += k
    emp = np.array([np.mean(sq >= e) for e in eps_grid])
    claim = np.minimum(1.0, 2 * T * d * np.exp(-eps_grid * m / (6.3 * L * L))) if L > 0 else np.zeros_like(eps_grid)
    ok_stack = np.all(emp <= claim + SIGMAS * np.array([_binom_sigma(p, trials) for p in claim]))

    single = np.linalg.norm(G[rng.integers(0, n, size=trials)] - mu, axis=1)
    radii = np.linspace(0.0, 2.0, 9) * L
    emp1 = np.array([np.mean(single >= r) for r in radii])
    claim1 = np.minimum(1.0, 2 * np.exp(-radii**2 / (2 * c * c * L * L))) if L > 0 else np.zeros_like(radii)
    ok_single = np.all(emp1 <= claim1 + SIGMAS * np.array([_binom_sigma(p, trials) for p in claim1]))
    c_exact = math.sqrt(2 / math.log(2))
    return VerificationReport(
        "fix-w-concentration", claim.tolist(), emp.tolist(), trials, f"{SIGMAS:g} binomial sigma",
        bool(ok_stack and ok_single and c_exact < c),
        {"eps": eps_grid.tolist(), "L": L, "single_draw_claim": claim1.tolist(), "single_draw_observed": emp1.tolist(),
         "c": c, "sqrt_2_over_ln2": c_exact, "sampling": "with replacement"})


# ---------------------------------------------------------------- Catoni moment

def verify_catoni_mmt(q_grid=None, eta: float = 1.0, k: int = 5, trials: int = 100_000, seed=0,
                      exact_max_k: int = 20) -> VerificationReport:
    """Per-sample multiplier ``== 1`` and the ``k``-sample moment ``<= 1``.

    The ``k``-sample moment ``E exp(lam (Phi(q) - mean b))`` with
    ``b_i ~ Bernoulli(q)`` and ``lam = eta k`` is enumerated exactly for
    ``k <= exact_max_k`` and estimated by Monte Carlo beyond.
    """
    rng = _rng(seed)
    q_grid = np.linspace(0.01, 0.99, 25) if q_grid is None else np.asarray(q_grid, dtype=float)
    per_sample = max(abs(sb.per_sample_multiplier(q, eta) - 1.0) for q in q_grid)
    lam = eta * k
    moments, limits = [], []
    exact = k <= exact_max_k
    for q in q_grid:
        shift = lam * sb.phi(q, lam, k)
        if exact:
            mom = math.fsum(math.comb(k, j) * q**j * (1 - q) ** (k - j) * math.exp(shift - lam * j / k)
                            for j in range(k + 1))
            limits.append(1.0 + EXACT_SLACK)
        else:
            x = np.exp(shift - lam * rng.binomial(k, q, size=trials) / k)
            mom = float(x.mean())
            limits.append(1.0 + SIGMAS * float(x.std(ddof=1)) / math.sqrt(trials))
        moments.append(mom)
    passed = per_sample <= 1e-13 and all(mm <= lim for mm, lim in zip(moments, limits))
    return VerificationReport("catoni-mmt", "multiplier == 1, moment <= 1", {"per_sample_max_dev": per_sample,
                              "moments": moments}, 2**k if exact else trials,
                              "1e-13 / 1e-12" if exact else f"1e-13 / {SIGMAS:g} sample sigma", passed,
                              {"q": q_grid.tolist(), "eta": eta, "k": k, "mode": "exact" if exact else "monte carlo"})


# ---------------------------------------------------------------- end-to-end data-dependent bound

def _threshold_grid(K: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, K)


def _threshold_errors(x, y, grid):
    # misclassification counts of h_theta(x) = 1[x > theta] for every theta in grid
    pred = x[..., None] > grid
    return np.sum(pred != y[..., None], axis=-2)


def verify_data_pac_end_to_end(n: int = 200, m: int = 100, delta: float = 0.1, family: str = "threshold",
                               replicas: int = 10_000, eta: float = 1.0, seed=0, true_risk: float = 0.3,
                               flip: float = 0.1, theta_star: float = 0.4, grid_size: int = 21,
                               prior_mass: float = 0.5) -> VerificationReport:
    """Violation rate of the data-dependent bound over fresh ``(S, J)`` draws.

    ``bernoulli``: a fixed classifier of known risk, ``Q = P`` and ``KL = 0``.

    ``threshold``: ``x ~ U[0, 1]``, ``y = 1[x > theta*]`` flipped with
    probability ``flip``; thresholds on a grid.  The prior puts
    ``prior_mass`` on the empirical minimiser over ``S_J`` and spreads the
    rest uniformly (uniform only when ``m = 0``).  The posterior is the
    two-point mixture on the minimiser over ``S`` and its right neighbour.
    True risks are analytic: ``flip + (1 - 2 flip) |theta - theta*|``.
    """
    rng = _rng(seed)
    params = sb.CatoniParams(eta, n, m, delta)
    k = n - m
    if family == "bernoulli":
        emp = rng.binomial(k, true_risk, size=replicas) / k
        bounds = np.array([sb.data_pac_bound(0.0, e, params).total for e in emp])
        risks = np.full(replicas, true_risk)
    elif family == "threshold":
        grid = _threshold_grid(grid_size)
        true = flip + (1 - 2 * flip) * np.abs(grid - theta_star)
        bounds = np.empty(replicas)
        risks = np.empty(replicas)
        pos = 0
        for size in _chunks(replicas, 1000):
            x = rng.random((size, n))
            y = (x > theta_star) ^ (rng.random((size, n)) < flip)
            order = _draw_wor(rng, n, m, size) if m else np.zeros((size, 0), dtype=int)
            inJ = np.zeros((size, n), dtype=bool)
            np.put_along_axis(inJ, order, True, axis=1)
            errJ = _threshold_errors(np.where(inJ, x, np.nan), np.where(inJ, y, False), grid) if m else None
            errI = _threshold_errors(np.where(inJ, np.nan, x), np.where(inJ, False, y), grid)
            errS = _threshold_errors(x, y, grid)
            for r in range(size):
                prior = np.full(grid_size, (1 - prior_mass) / grid_size if m else 1.0 / grid_size)
                if m:
                    prior[int(np.argmin(errJ[r]))] += prior_mass
                best = int(np.argmin(errS[r]))
                support = [best, min(best + 1, grid_size - 1)]
                q = np.zeros(grid_size)
                q[support[0]] += 0.5
                q[support[1]] += 0.5
                nz = q > 0
                kl = float(np.sum(q[nz] * np.log(q[nz] / prior[nz])))
                emp = float(q @ errI[r]) / k
                bounds[pos + r] = sb.data_pac_bound(kl, emp, params).total
                risks[pos + r] = float(q @ true)
            pos += size
    else:
        raise ValueError(f"unknown toy family {family!r}")
    rate = float(np.mean(risks > bounds))
    limit = delta + SIGMAS * _binom_sigma(delta, replicas)
    return VerificationReport("data-pac", delta, rate, replicas, f"{SIGMAS:g} binomial sigma", rate <= limit,
                              {"family": family, "n": n, "m": m, "eta": eta, "mean_bound": float(bounds.mean()),
                               "mean_true_risk": float(risks.mean())})


# ---------------------------------------------------------------- MGF / tail conversion

def verify_prob_eexp(K: float = 1.0, trials: int = 100_000, seed=0) -> VerificationReport:
    """Both directions of the tail/MGF conversion on exponential families.

    Tail to MGF: ``A = 0``; ``A ~ Exp(1)`` (``E e^{A/5} = 1.25``);
    ``A = ln K + Exp(1)`` (``E e^{A/5} = 1.25 K^{1/5}``).  Each satisfies
    ``Pr[A >= eps] <= 2K e^{-eps}`` and must have ``E e^{A/5} <= 8K``.
    Converse: ``e^A ~ Exp`` with mean ``2K``, whose tails must sit below
    ``2K e^{-eps}``.
    """
    rng = _rng(seed)
    cases = {}
    a_exp = rng.exponential(1.0, trials)
    a_shift = math.log(max(K, 1.0)) + rng.exponential(1.0, trials)
    for name, sample, closed in (("zero", np.zeros(trials), 1.0),
                                 ("exp1", a_exp, 1.25),
                                 ("shifted", a_shift, 1.25 * max(K, 1.0) ** 0.2)):
        x = np.exp(sample / 5)
        mean, se = float(x.mean()), float(x.std(ddof=1)) / math.sqrt(trials)
        cases[name] = {"mgf": mean, "closed_form": closed, "limit": 8 * K,
                       "ok": mean <= 8 * K + SIGMAS * se and abs(mean - closed) <= SIGMAS * se + 1e-15}
    ex = rng.exponential(2 * K, trials)
    eps = np.linspace(0.0, 8.0, 17)
    with np.errstate(divide="ignore"):
        A = np.log(ex)
    emp = np.array([np.mean(A >= e) for e in eps])
    claim = np.minimum(1.0, 2 * K * np.exp(-eps))
    cases["converse"] = {"eps": eps.tolist(), "observed": emp.tolist(), "claim": claim.tolist(),
                         "ok": bool(np.all(emp <= claim + SIGMAS * np.array([_binom_sigma(p, trials) for p in claim])))}
    passed = all(c["ok"] for c in cases.values())
    return VerificationReport("prob-eexp", "E e^{A/5} <= 8K; E e^A <= 2K => tail <= 2K e^-eps",
                              {k: v.get("mgf", v.get("observed")) for k, v in cases.items()}, trials,
                              f"{SIGMAS:g} sigma", passed, {"K": K, "cases": cases})


# ---------------------------------------------------------------- KL chain rule

def _kl(p, q) -> float:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    nz = p > 0
    if np.any(q[nz] == 0):
        return math.inf
    return math.fsum((p[nz] * np.log(p[nz] / q[nz])).tolist())


def random_chain(rng, states: int, T: int, concentration: float = 1.0):
    init = rng.dirichlet(np.full(states, concentration))
    trans = rng.dirichlet(np.full(states, concentration), size=(T, states))
    return init, trans


def chain_kl_sides(p_chain, q_chain) -> tuple[float, float, float]:
    """``(joint KL by enumeration, chain-rule sum, KL of the final marginals)``."""
    p0, P = p_chain
    q0, Q = q_chain
    T, S = P.shape[0], p0.size
    joint_p, joint_q = [], []
    for path in itertools.product(range(S), repeat=T + 1):
        pp, qq = p0[path[0]], q0[path[0]]
        for t in range(T):
            pp *= P[t, path[t], path[t + 1]]
            qq *= Q[t, path[t], path[t + 1]]
        joint_p.append(pp)
        joint_q.append(qq)
    joint = _kl(joint_p, joint_q)
    chain = [_kl(p0, q0)]
    marg_p, marg_q = p0.copy(), q0.copy()
    for t in range(T):
        chain.append(math.fsum(marg_p[s] * _kl(P[t, s], Q[t, s]) for s in range(S) if marg_p[s] > 0))
        marg_p, marg_q = marg_p @ P[t], marg_q @ Q[t]
    return joint, math.fsum(chain), _kl(marg_p, marg_q)


def verify_kl_chain_rule(n_chains: int = 20, states: int = 3, T: int = 4, seed=0) -> VerificationReport:
    """Joint KL of two Markov chains equals initial KL plus expected step KLs."""
    if states > 8 or T > 6:
        raise ValueError("keep states <= 8 and T <= 6 so the joint stays enumerable")
    rng = _rng(seed)
    worst, marg_ok = 0.0, True
    for _ in range(n_chains):
        a, b = random_chain(rng, states, T), random_chain(rng, states, T)
        joint, chain, marg = chain_kl_sides(a, b)
        worst = max(worst, abs(joint - chain) / max(1.0, abs(joint)))
        marg_ok &= marg <= joint + EXACT_SLACK
    same = random_chain(rng, states, T)
    zero = chain_kl_sides(same, same)
    passed = worst <= EXACT_SLACK and marg_ok and max(abs(v) for v in zero) <= EXACT_SLACK
    return VerificationReport("chain-kl", "joint == chain sum; marginal <= joint", worst, n_chains,
                              f"{EXACT_SLACK:g} relative", passed,
                              {"marginal_le_joint": bool(marg_ok), "identical_chains": list(zero),
                               "states": states, "T": T})


# ---------------------------------------------------------------- pathwise FGD KL

def verify_fgd_kl_pathwise(obj=None, split: IndexSplit | None = None, sched: Schedule | None = None, w0=None,
                           p: float | None = None, seed=0) -> VerificationReport:
    """Exact path KL of floored GD against the prior process, prefix by prefix.

    At each step the integer vector ``a_t`` is recovered from the realised
    iterates as ``(W_{t-1} + momentum - gamma grad f(W_{t-1}, S_J) - W_t) / eps``;
    its prior log-probability gives the exact step KL.  The checks are
    ``sum exact <= sum per-step bound == 3Tdp + ln(1/p) sum (gamma/eps)^2 |g|^2``
    at every prefix.
    """
    rng = _rng(seed)
    if obj is None:
        data = synth_blobs(300, 4, 3, 3.0, rng)
        arch = ModelArch.linear(4, 3)
        obj = ModelObjective(arch, data)
        split = sample_prior_indices(data.n, 150, rng)
        sched = Schedule.constant(200, 0.5, eps=1e-3, alpha=0.5)
        w0 = init_params(arch, rng)
    T, d = sched.T, obj.dim
    p = default_p(T, d) if p is None else p
    spec = GridNoiseSpec(p, d)
    state = OptState.start(w0)
    exact_cum = bound_cum = closed_cum = 0.0
    weighted = 0.0
    prefix_ok, recovery_err, nonzero = True, 0.0, 0
    for t in range(1, T + 1):
        prev = state
        gJ = obj.grad(prev.w, split.J)
        g = obj.grad(prev.w) - gJ
        state, rec = step_fgd(prev, obj, split, sched, t)
        gamma, eps = sched.gamma[t - 1], sched.eps[t - 1]
        drift = prev.w + sched.alpha * (prev.w - prev.w_prev) - gamma * gJ
        raw = (drift - state.w) / eps
        a = np.rint(raw)
        recovery_err = max(recovery_err, float(np.max(np.abs(raw - a))))
        nonzero += int(np.any(a != 0))
        exact_cum += per_step_kl_exact(a, spec)
        bound_cum += per_step_kl_bound(g, gamma, eps, spec)
        weighted += rec["grad_diff_sq_weighted_eps"]
        closed_cum = 3 * t * d * p + spec.log_inv_p * weighted
        prefix_ok &= exact_cum <= bound_cum * (1 + 1e-12) and abs(bound_cum - closed_cum) <= 1e-9 * max(1, closed_cum)
    three = 3 * T * d * p
    passed = bool(prefix_ok and recovery_err < 1e-6 and abs(three - 3.0) < 1e-12) if p == default_p(T, d) \
        else bool(prefix_ok and recovery_err < 1e-6)
    return VerificationReport("fgd-kl-pathwise", bound_cum, exact_cum, T, "1e-12 relative", passed,
                              {"T": T, "d": d, "p": p, "3Tdp": three, "steps_with_nonzero_lattice": nonzero,
                               "max_recovery_residual": recovery_err})


def duplicate_data_path(T: int = 50, seed=0) -> VerificationReport:
    """Zero-difference path: every point appears twice and ``J`` is one copy."""
    rng = _rng(seed)
    base = synth_blobs(100, 3, 3, 3.0, rng)
    data = Dataset(np.vstack([base.features, base.features]), np.concatenate([base.labels, base.labels]), 3)
    arch = ModelArch.linear(3, 3)
    obj = ModelObjective(arch, data)
    split = IndexSplit.from_prior(np.arange(100), 200)
    sched = Schedule.constant(T, 0.5, eps=1e-3)
    rep = verify_fgd_kl_pathwise(obj, split, sched, init_params(arch, rng))
    d = obj.dim
    spec = GridNoiseSpec(default_p(T, d), d)
    expected = T * spec.log_normalizer
    rep.details["expected_exact"] = expected
    rep.passed = rep.passed and abs(rep.observed - expected) <= 1e-9 and rep.observed <= 3 * T * d * spec.p
    rep.lemma_id = "fgd-kl-pathwise (zero difference)"
    return rep


# ---------------------------------------------------------------- CLD pieces

def verify_ou_stationary(lambda_reg: float = 1.0, beta: float = 2.0, dt: float = 0.01, steps: int = 500,
                         dim: int = 4000, seed=0) -> VerificationReport:
    """Langevin dynamics on ``f = 0`` from ``N(0, 1/(lambda beta))``: per-coordinate variance stays put."""
    sched = Schedule.constant(steps, 0.0, beta=beta, lambda_reg=lambda_reg)
    log = run("cld", ZeroObjective(dim), sched, None, seed=seed, dt=dt)
    w = log.final_params
    var = float(np.var(w, ddof=1))
    target = 1.0 / (lambda_reg * beta)
    sd = target * math.sqrt(2.0 / (dim - 1))
    return VerificationReport("ou-stationary", target, var, dim, f"{SIGMAS:g} sample sigma",
                              abs(var - target) <= SIGMAS * sd,
                              {"dt": dt, "steps": steps, "em_stationary": target / (1 - lambda_reg * dt / 2)})


def verify_cld_grad_integral(n: int = 200, m: int = 50, steps: int = 100, dt: float = 0.05, beta: float = 1.0,
                             lambda_reg: float = 1.0, C: float = 0.5, deltas=(0.1, 0.05), trials: int = 5000,
                             seed=0) -> VerificationReport:
    """Quantile of the discretised weighted gradient-difference integral over ``J`` draws.

    The Langevin path is simulated once on the full sample (it never sees
    ``J``).  For each ``J`` the integral
    ``sum_t e^{alpha ((t-1) dt - T)} |grad f(W, S) - grad f(W, S_J)|^2 dt`` is
    compared at level ``1 - delta`` with ``C_delta L^2 (1 - e^{-alpha T}) / (alpha m)``
    where ``alpha = lambda / e^{8 beta C}`` and ``L`` is the largest
    per-example gradient norm along the path.
    """
    rng = _rng(seed)
    data = synth_blobs(n, 2, 3, 3.0, rng)
    arch = ModelArch.linear(2, 3)
    obj = ModelObjective(arch, data)
    sched = Schedule.constant(steps, 0.0, beta=beta, lambda_reg=lambda_reg)
    log = run("cld", obj, sched, None, seed=rng, dt=dt, snapshot_every=1)
    horizon = steps * dt
    alpha = lambda_reg / math.exp(8 * beta * C)
    weights = np.exp(alpha * (np.arange(steps) * dt - horizon)) * dt
    G = np.stack([obj.per_example_grads(log.snapshots[t]) for t in range(steps)])
    L = float(np.max(np.linalg.norm(G, axis=2)))
    H = _stack(G, weights)
    mu = H.mean(axis=0)
    vals = np.empty(trials)
    pos = 0
    for k in _chunks(trials, 2000):
        J = _draw_wor(rng, n, m, k)
        diff = H[J].mean(axis=1) - mu
        vals[pos:pos + k] = np.einsum("kd,kd->k", diff, diff)
        pos += k
    rows = []
    for delta in deltas:
        bound = sb.c_delta(delta) * L * L * -math.expm1(-alpha * horizon) / (alpha * m)
        q = float(np.quantile(vals, 1 - delta))
        rows.append({"delta": delta, "quantile": q, "bound": bound, "ok": q <= bound})
    return VerificationReport("cld-grad-con", [r["bound"] for r in rows], [r["quantile"] for r in rows], trials,
                              "none (quantile vs bound)", all(r["ok"] for r in rows),
                              {"L": L, "alpha": alpha, "horizon": horizon, "rows": rows})


# ---------------------------------------------------------------- suite

def _mcd_mean(seed=1, inject_bug=False, trials=100_000):
    rng = _rng(seed)
    values = rng.random(50) * 3.0
    n, m = 50, 10
    r = float(values.max() - values.min())
    return verify_mcdiarmid_wor(lambda J: values[J].mean(axis=-1), n, m, r / m, np.linspace(0.05, 1.0, 12) * r,
                                trials, rng, mean=float(values.mean()),
                                tail_constant=200.0 if inject_bug else 2.0, label="new-mcd (mean)")


def _mcd_trajectory(seed=2, trials=100_000, tight=False):
    G, w = frozen_langevin_path(100, 20, seed)
    phi, c_of = stacked_functional(_stack(G, w))
    m = 20
    c = c_of(m)
    return verify_mcdiarmid_wor(phi, 100, m, c, np.linspace(0.1, 3.0, 12) * c, trials, seed + 100, tight=tight,
                                label="new-mcd (trajectory)")


def _subgaussian(seed=3, trials=100_000):
    rng = _rng(seed)
    T, d = 4, 5
    G = rng.normal(size=(100, T * d))
    G /= np.linalg.norm(G, axis=1, keepdims=True)
    return verify_norm_subgaussian(G, 25, T, d, trials=trials, seed=rng)


SUITE = {
    "catoni-mmt": lambda bug=False: verify_catoni_mmt(eta=1.0, k=20, seed=4),
    "variance-wor": lambda bug=False: verify_variance_wor(seed=5),
    "new-mcd": lambda bug=False: _mcd_mean(inject_bug=bug),
    "new-mcd-trajectory": lambda bug=False: _mcd_trajectory(),
    "fix-w-concentration": lambda bug=False: _subgaussian(),
    "prob-eexp": lambda bug=False: verify_prob_eexp(1.0, seed=6),
    "chain-kl": lambda bug=False: verify_kl_chain_rule(seed=7),
    "data-pac": lambda bug=False: verify_data_pac_end_to_end(seed=8),
    "fgd-kl-pathwise": lambda bug=False: verify_fgd_kl_pathwise(seed=9),
    "fgd-kl-zero-difference": lambda bug=False: duplicate_data_path(seed=12),
    "ou-stationary": lambda bug=False: verify_ou_stationary(seed=10),
    "cld-grad-con": lambda bug=False: verify_cld_grad_integral(seed=11),
}


def run_suite(selector: str = "all", inject_bug: bool = False) -> list[VerificationReport]:
    """Run one verifier by name, or every verifier for ``"all"``.

    ``inject_bug`` swaps the McDiarmid exponent constant 2 for 200, a
    negative control that must come out red.
    """
    if selector == "all":
        names = list(SUITE)
    elif selector in SUITE:
        names = [selector]
    else:
        raise KeyError(f"unknown verifier {selector!r}; choose from {['all', *SUITE]}")
    return [SUITE[name](inject_bug) for name in names]
