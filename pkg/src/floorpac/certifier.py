"""Turn trajectory logs into theorem-tagged reports; sweeps and paired comparisons.

The empirical term always uses the risk on the complement ``S_I``.  Each
report echoes every input it was computed from and :meth:`BoundReport.recheck`
re-evaluates the bound from that echo.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import scalar_bounds as sb
from .config import RunConfig, RunResult, execute
from .optimizers import Algorithm, TrajectoryLog, _jsonable

__all__ = [
    "BoundReport",
    "MissingQuantityError",
    "SCHEMA_VERSION",
    "certify",
    "compare_variants",
    "eta_grid_search",
    "evaluate",
    "random_label_curve",
    "sweep_m",
]

SCHEMA_VERSION = 1
ETA_PRESETS = (1.0, 1.5, 2.0)


class MissingQuantityError(KeyError):
    def __init__(self, name: str, theorem: str):
        super().__init__(f"theorem {theorem} needs {name!r}, which the log/extras do not provide")
        self.field = name

    def __str__(self) -> str:
        return self.args[0]


def evaluate(theorem, inputs: dict) -> sb.BoundBreakdown:
    """Evaluate ``theorem`` from a flat dict of inputs (the echo format of reports)."""
    th = sb.TheoremId(theorem)
    params = sb.CatoniParams(inputs["eta"], inputs["n"], inputs["m"], inputs["delta"])
    emp = inputs["emp_risk_I"]
    if th is sb.TheoremId.DATA_PAC:
        return sb.data_pac_bound(inputs["kl"], emp, params)
    if th is sb.TheoremId.FGD:
        return sb.fgd_bound(emp, inputs["weighted_sum"], inputs["d"], inputs["T"], params)
    if th is sb.TheoremId.FSGD:
        return sb.fsgd_bound(emp, inputs["weighted_sum"], inputs["d"], inputs["T"], params,
                             provenance=inputs.get("sum_provenance", "single-realization"))
    if th is sb.TheoremId.RGD:
        return sb.rgd_bound(emp, inputs["weighted_sum"], inputs["eps"], inputs["d"], inputs["T"], params)
    if th is sb.TheoremId.GLD:
        return sb.gld_bound(emp, inputs["weighted_sum"], params)
    if th is sb.TheoremId.SGLD:
        return sb.sgld_bound(emp, inputs["weighted_sum"], inputs["b"], params)
    if th is sb.TheoremId.SGLD_SUBG:
        return sb.sgld_bound_subgaussian(emp, inputs["L0"], inputs["schedule_sum"], inputs["T"], inputs["d"], params)
    return sb.cld_bound(emp, inputs["beta"], inputs["lambda_reg"], inputs["C"], inputs["L"],
                        inputs["T_horizon"], params)


@dataclass(eq=False)
class BoundReport:
    theorem_id: sb.TheoremId
    breakdown: sb.BoundBreakdown
    inputs: dict
    risks: dict
    metadata: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return self.breakdown.total

    @property
    def vacuous(self) -> bool:
        return self.breakdown.vacuous

    @property
    def train_gap(self) -> float:
        """``R(W_T, S_I) - R(W_T, S)``; near zero unless training leaned on ``S_J``."""
        return self.risks.get("train_I", math.nan) - self.risks.get("train_S", math.nan)

    def recheck(self, tol: float = 1e-12) -> bool:
        again = evaluate(self.theorem_id, self.inputs)
        return all(abs(getattr(again, k) - getattr(self.breakdown, k)) <= tol
                   for k in ("empirical_term", "confidence_term", "kl_term", "total"))

    def as_dict(self) -> dict:
        return _jsonable({
            "schema_version": SCHEMA_VERSION,
            "theorem_id": self.theorem_id.value,
            "breakdown": self.breakdown.as_dict(),
            "inputs": self.inputs,
            "risks": self.risks,
            "diagnostics": {"train_gap_I_minus_S": self.train_gap},
            "vacuous": self.vacuous,
            "metadata": self.metadata,
        })

    def to_json(self, path=None) -> str:
        text = json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "BoundReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {d.get('schema_version')!r}")
        th = sb.TheoremId(d["theorem_id"])
        # keep the stored numbers so that recheck() compares them against a fresh evaluation
        b = d["breakdown"]
        breakdown = sb.BoundBreakdown(float(b["empirical_term"]), float(b["confidence_term"]),
                                      float(b["kl_term"]), float(b["total"]), th, dict(b.get("metadata", {})))
        return cls(th, breakdown, d["inputs"], d["risks"], d.get("metadata", {}))

    def table(self) -> str:
        """Plain-text breakdown: empirical (held-out) term, confidence term, KL term."""
        b = self.breakdown
        rows = [
            ("empirical term (risk on S_I)", b.empirical_term),
            ("confidence term", b.confidence_term),
            ("KL term", b.kl_term),
            ("total", b.total),
        ]
        width = max(len(r[0]) for r in rows)
        lines = [f"theorem {self.theorem_id.value}  eta={self.inputs['eta']:g} delta={self.inputs['delta']:g} "
                 f"n={self.inputs['n']} m={self.inputs['m']}"]
        lines += [f"  {name:<{width}}  {val:.6g}" for name, val in rows]
        for key in ("train_S", "train_I", "test"):
            if key in self.risks and self.risks[key] is not None and math.isfinite(self.risks[key]):
                lines.append(f"  {'risk ' + key:<{width}}  {self.risks[key]:.6g}")
        lines.append(f"  {'vacuous':<{width}}  {'yes' if self.vacuous else 'no'}")
        return "\n".join(lines)


def _need(source: dict, name: str, theorem: str):
    val = source.get(name)
    if val is None or (isinstance(val, float) and not math.isfinite(val)):
        raise MissingQuantityError(name, theorem)
    return val


def _log_sum(log: TrajectoryLog, column: str, theorem: str) -> float:
    if log.T == 0:
        return 0.0
    if not log.has(column):
        raise MissingQuantityError(column, theorem)
    return log.total(column)


def certify(log: TrajectoryLog, theorem, params: sb.CatoniParams, extras: dict | None = None) -> BoundReport:
    """Certificate for the final iterate of ``log`` under ``theorem``.

    ``extras`` may carry ``b``, ``beta``, ``lambda_reg``, ``C``, ``L``, ``L0``,
    ``kl`` or ``eps`` and can override the logged sums with ``weighted_sum``
    (for example a multi-seed average, labelled through ``sum_provenance``).
    """
    th = sb.TheoremId(theorem)
    extras = dict(extras or {})
    meta = log.metadata
    if meta.get("n") is not None and meta["n"] != params.n:
        raise ValueError(f"params.n={params.n} but the log was produced with n={meta['n']}")
    if meta.get("m") is not None and meta["m"] != params.m:
        raise ValueError(f"params.m={params.m} but the log was produced with m={meta['m']}")
    emp = log.final.get("train_risk_I")
    if emp is None or not math.isfinite(emp):
        raise MissingQuantityError("train_risk_I", th.value)
    inputs = {"eta": params.eta, "delta": params.delta, "n": params.n, "m": params.m, "emp_risk_I": emp}
    d = int(_need(meta, "d", th.value))
    T = log.T

    if th is sb.TheoremId.DATA_PAC:
        inputs["kl"] = float(_need(extras, "kl", th.value))
    elif th in (sb.TheoremId.FGD, sb.TheoremId.FSGD):
        inputs.update(d=d, T=T)
        if "weighted_sum" in extras:
            inputs["weighted_sum"] = float(extras["weighted_sum"])
            inputs["sum_provenance"] = extras.get("sum_provenance", "supplied")
        else:
            inputs["weighted_sum"] = _log_sum(log, "grad_diff_sq_weighted_eps", th.value)
            inputs["sum_provenance"] = "single-realization"
    elif th is sb.TheoremId.RGD:
        eps = extras.get("eps")
        if eps is None:
            eps_values = meta.get("eps_values") or []
            if len(eps_values) != 1:
                raise MissingQuantityError("eps (constant)", th.value)
            eps = eps_values[0]
        inputs.update(d=d, T=T, eps=float(eps))
        inputs["weighted_sum"] = float(extras.get("weighted_sum",
                                                  _log_sum(log, "grad_diff_sq_weighted_gamma", th.value)))
    elif th in (sb.TheoremId.GLD, sb.TheoremId.SGLD):
        inputs["weighted_sum"] = float(extras.get("weighted_sum", _log_sum(log, "Lw_sq_weighted", th.value)))
        if th is sb.TheoremId.SGLD:
            inputs["b"] = int(extras.get("b") or _need(meta, "batch_size", th.value))
    elif th is sb.TheoremId.SGLD_SUBG:
        sums = log.sums()
        inputs.update(d=d, T=T)
        inputs["L0"] = float(extras["L0"] if "L0" in extras else _need(sums, "Lw_max", th.value))
        inputs["schedule_sum"] = float(extras.get("schedule_sum", _need(sums, "schedule_sum", th.value)))
    else:
        sums = log.sums()
        inputs["beta"] = float(extras.get("beta") or _need(meta, "beta", th.value))
        inputs["lambda_reg"] = float(extras.get("lambda_reg") or _need(meta, "lambda_reg", th.value))
        inputs["C"] = float(extras.get("C") or _need(meta, "loss_bound", th.value))
        inputs["L"] = float(extras["L"] if "L" in extras else _need(sums, "Lw_max", th.value))
        inputs["T_horizon"] = float(extras.get("T_horizon") or _need(meta, "horizon", th.value))

    breakdown = evaluate(th, inputs)
    risks = {"train_S": log.final.get("train_risk_S"), "train_I": emp,
             "train_J": log.final.get("train_risk_J"), "test": log.final.get("test_risk")}
    risks = {k: v for k, v in risks.items() if v is not None}
    report_meta = {k: meta.get(k) for k in ("algorithm", "seed", "rng", "config_digest")}
    report_meta["sum_provenance"] = inputs.get("sum_provenance", "single-realization")
    report = BoundReport(th, breakdown, inputs, risks, report_meta)
    if not report.recheck():
        raise AssertionError("report does not re-evaluate to its own breakdown")
    return report


def default_theorem(algorithm: str) -> sb.TheoremId:
    return {
        Algorithm.FGD: sb.TheoremId.FGD,
        Algorithm.FSGD: sb.TheoremId.FSGD,
        Algorithm.RGD: sb.TheoremId.RGD,
        Algorithm.GLD: sb.TheoremId.GLD,
        Algorithm.SGLD: sb.TheoremId.SGLD,
        Algorithm.CLD: sb.TheoremId.CLD,
    }.get(Algorithm(algorithm), sb.TheoremId.FGD)


def certify_result(res: RunResult, theorem=None, eta=None, delta=None, extras=None) -> BoundReport:
    c = res.config.certify
    th = theorem or c.theorem or default_theorem(res.config.algorithm)
    params = sb.CatoniParams(eta if eta is not None else c.eta, res.split.n, res.split.m,
                             delta if delta is not None else c.delta)
    merged = {**c.extras, **(extras or {})}
    return certify(res.log, th, params, merged)


def eta_grid_search(log: TrajectoryLog, theorem, n: int, m: int, delta: float,
                    grid=ETA_PRESETS, extras=None) -> BoundReport:
    """Smallest total over an eta grid, each evaluated at ``delta / len(grid)``.

    The union bound over the grid keeps the overall failure probability at ``delta``.
    """
    grid = tuple(grid)
    if not grid:
        raise ValueError("empty eta grid")
    best = None
    for eta in grid:
        rep = certify(log, theorem, sb.CatoniParams(eta, n, m, delta / len(grid)), extras)
        if best is None or rep.total < best.total:
            best = rep
    best.metadata["eta_grid"] = list(grid)
    best.metadata["union_bound_delta"] = delta
    return best


def _mean_std(xs) -> tuple[float, float]:
    xs = np.asarray(xs, dtype=float)
    return float(xs.mean()), float(xs.std(ddof=1)) if xs.size > 1 else 0.0


def _seeds(repeats: int, seeds) -> list[int]:
    seeds = list(range(repeats)) if seeds is None else list(seeds)
    if len(seeds) != repeats:
        raise ValueError(f"need {repeats} seeds, got {len(seeds)}")
    return seeds


def _sum_column(algorithm: str) -> str:
    algo = Algorithm(algorithm)
    if algo in (Algorithm.FGD, Algorithm.FSGD):
        return "grad_diff_sq_weighted_eps"
    if algo is Algorithm.RGD:
        return "grad_diff_sq_weighted_gamma"
    if algo in (Algorithm.GLD, Algorithm.SGLD):
        return "grad_diff_sq_weighted_sigma"
    return "grad_diff_sq"


class SweepError(RuntimeError):
    def __init__(self, key: str, seed: int, cause: Exception):
        super().__init__(f"run {key}, seed {seed} failed: {cause}")
        self.key, self.seed = key, seed


def sweep_m(base: RunConfig, m_values, repeats: int = 1, seeds=None, theorem=None) -> list[dict]:
    """Per ``m``: mean/std over seeds of the cumulative gradient-difference sum and bound total."""
    m_values = list(m_values)
    if any(b <= a for a, b in zip(m_values, m_values[1:])):
        raise ValueError("m_values must be strictly increasing")
    if m_values and m_values[-1] >= base.data.n:
        raise ValueError(f"all m must be < n={base.data.n}")
    column = _sum_column(base.algorithm)
    rows = []
    for m in m_values:
        sums, totals, tests = [], [], []
        for seed in _seeds(repeats, seeds):
            try:
                res = execute(base.replace(**{"split.m": m, "seed": seed}))
                rep = certify_result(res, theorem)
            except Exception as exc:
                raise SweepError(f"m={m}", seed, exc) from exc
            sums.append(res.log.total(column))
            totals.append(rep.total)
            tests.append(res.log.final.get("test_risk", math.nan))
        s_mean, s_std = _mean_std(sums)
        b_mean, b_std = _mean_std(totals)
        rows.append({"m": m, "sum_mean": s_mean, "sum_std": s_std, "bound_mean": b_mean,
                     "bound_std": b_std, "test_mean": float(np.mean(tests)), "runs": len(sums)})
    return rows


def m_trend(rows: list[dict]) -> float:
    """Spearman rank correlation between ``m`` and the mean cumulative sum."""
    return float(stats.spearmanr([r["m"] for r in rows], [r["sum_mean"] for r in rows]).statistic)


def random_label_curve(base: RunConfig, portions, repeats: int = 1, seeds=None, theorem=None) -> list[dict]:
    """Per label-noise portion: final risks and bound totals, mean and std over seeds."""
    rows = []
    for portion in portions:
        if not 0.0 <= portion <= 1.0:
            raise ValueError(f"portion {portion} outside [0, 1]")
        cols = {"train_S": [], "train_I": [], "test": [], "bound": [], "vacuous": []}
        for seed in _seeds(repeats, seeds):
            try:
                res = execute(base.replace(**{"data.label_noise": float(portion), "seed": seed}))
                rep = certify_result(res, theorem)
            except Exception as exc:
                raise SweepError(f"portion={portion}", seed, exc) from exc
            cols["train_S"].append(res.log.final["train_risk_S"])
            cols["train_I"].append(res.log.final["train_risk_I"])
            cols["test"].append(res.log.final.get("test_risk", math.nan))
            cols["bound"].append(rep.total)
            cols["vacuous"].append(float(rep.vacuous))
        row = {"portion": float(portion), "runs": repeats}
        for key, vals in cols.items():
            row[f"{key}_mean"], row[f"{key}_std"] = _mean_std(vals)
        rows.append(row)
    return rows


_PAIRS = {("fgd", "gd"), ("fsgd", "sgd")}


def compare_variants(config: RunConfig, seeds=(0,), reference: str | None = None) -> list[dict]:
    """Run a floored method and its plain counterpart on identical data, init and batches.

    Returns one row per step (averaged over seeds) with the parameter distance
    and the train/test risk deltas.  Risks are evaluated every step.
    """
    algo = config.algorithm
    ref = reference or {"fgd": "gd", "fsgd": "sgd"}.get(algo)
    if (algo, ref) not in _PAIRS:
        raise ValueError(f"no comparison defined for {algo} vs {ref}")
    T = config.schedule.T
    dist = np.zeros((len(seeds), T))
    d_train = np.zeros((len(seeds), T))
    d_test = np.zeros((len(seeds), T))
    for k, seed in enumerate(seeds):
        a_cfg = config.replace(seed=seed, eval_every=1)
        b_cfg = a_cfg.replace(algorithm=ref)
        if a_cfg.build_schedule().gamma.tolist() != b_cfg.build_schedule().gamma.tolist():
            raise ValueError("schedules differ between the paired runs")
        a = execute(a_cfg, snapshot_every=1)
        b = execute(b_cfg, snapshot_every=1)
        for t in range(1, T + 1):
            dist[k, t - 1] = float(np.max(np.abs(a.log.snapshots[t] - b.log.snapshots[t])))
        d_train[k] = a.log.column("train_risk_S") - b.log.column("train_risk_S")
        if a.test_objective is not None:
            d_test[k] = a.log.column("test_risk") - b.log.column("test_risk")
        else:
            d_test[k] = math.nan
    return [{"t": t + 1, "param_dist_inf": float(dist[:, t].mean()),
             "train_risk_delta": float(d_train[:, t].mean()), "test_risk_delta": float(d_test[:, t].mean())}
            for t in range(T)]
