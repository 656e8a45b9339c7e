"""Command-line entry point.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import scalar_bounds as sb
from .certifier import (MissingQuantityError, certify, certify_result, m_trend, random_label_curve, sweep_m)
from .concentration_lab import SUITE, run_suite
from .config import ConfigError, RunConfig, execute, load_config
from .datasets import Dataset, corrupt_labels, synth_blobs, synth_idx_images, write_idx
from .models import save_params
from .optimizers import TrajectoryLog
from .plots import line_chart

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
THEOREMS = [t.value for t in sb.TheoremId]


def _out_dir(args, cfg: RunConfig | None = None) -> Path:
    out = Path(args.out or (cfg.out if cfg and cfg.out else "floorpac-out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config", "a configuration file is required")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _write_table(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def cmd_train(args) -> int:
    cfg = _load(args)
    res = execute(cfg)
    out = _out_dir(args, cfg)
    res.log.save(out / "trajectory")
    save_params(out / "params.bin", res.objective.arch, res.log.final_params, cfg.seed)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    report = certify_result(res, args.theorem, args.eta, args.delta)
    report.to_json(out / "report.json")
    print(f"config digest {cfg.digest()}")
    print(report.table())
    if args.svg and res.log.T:
        column = {"fgd": "grad_diff_sq_weighted_eps", "fsgd": "grad_diff_sq_weighted_eps",
                  "rgd": "grad_diff_sq_weighted_gamma", "gld": "Lw_sq_weighted",
                  "sgld": "Lw_sq_weighted", "cld": "grad_diff_sq"}.get(cfg.algorithm)
        if column and res.log.has(column):
            steps = [r["t"] for r in res.log.records]
            svg = line_chart(steps, {column: res.log.cumulative(column).tolist()},
                             f"cumulative {column}", "step", column)
            (out / "cumulative.svg").write_text(svg)
    print(f"wrote {out}")
    return EXIT_OK


def _extras(pairs) -> dict:
    extras = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError("--extra", f"expected key=value, got {item!r}")
        key, val = item.split("=", 1)
        extras[key] = float(val)
    return extras


def cmd_certify(args) -> int:
    log = TrajectoryLog.load(args.trajectory)
    meta = log.metadata
    if meta.get("m") is None:
        raise ConfigError("trajectory", "log carries no prior split (m)")
    theorem = args.theorem or {"fgd": "fgd", "fsgd": "fsgd", "rgd": "rgd", "gld": "gld", "sgld": "sgld",
                               "cld": "cld"}.get(log.algorithm, "fgd")
    params = sb.CatoniParams(args.eta if args.eta is not None else 1.0, meta["n"], meta["m"],
                             args.delta if args.delta is not None else 0.1)
    report = certify(log, theorem, params, _extras(args.extra))
    print(report.table())
    if args.out:
        out = _out_dir(args)
        report.to_json(out / "report.json")
        print(f"wrote {out / 'report.json'}")
    return EXIT_OK


def _values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError("--values", f"cannot parse {text!r}") from None


def _sweep_rows(cfg: RunConfig, args, values: list[float], seeds: list[int]) -> list[dict]:
    """One library call per axis value so that a failing value leaves the others intact."""
    rows = []
    for v in values:
        try:
            if args.axis == "m":
                got = sweep_m(cfg, [int(v)], args.repeats, seeds, args.theorem)
            elif args.axis == "portion":
                got = random_label_curve(cfg, [v], args.repeats, seeds, args.theorem)
            else:
                totals = []
                for seed in seeds:
                    rep = certify_result(execute(cfg.replace(seed=seed)), args.theorem, v, args.delta)
                    totals.append(rep.total)
                mean = sum(totals) / len(totals)
                std = (sum((t - mean) ** 2 for t in totals) / (len(totals) - 1)) ** 0.5 if len(totals) > 1 else 0.0
                got = [{"eta": v, "bound_mean": mean, "bound_std": std, "vacuous": mean >= 1.0, "runs": len(totals)}]
            row = {**got[0], "failure": ""}
        except Exception as exc:
            key = "m" if args.axis == "m" else args.axis
            row = {key: int(v) if args.axis == "m" else v, "failure": str(exc)}
        row["config_digest"] = cfg.digest()
        rows.append(row)
    return rows


def cmd_sweep(args) -> int:
    cfg = _load(args)
    values = _values(args.values)
    if not values:
        raise ConfigError("--values", "no axis values given")
    if args.axis == "m" and (any(b <= a for a, b in zip(values, values[1:]))
                             or any(v != int(v) or not 0 <= v < cfg.data.n for v in values)):
        raise ConfigError("--values", f"m values must be strictly increasing integers in [0, {cfg.data.n})")
    if args.axis == "portion" and any(not 0.0 <= v <= 1.0 for v in values):
        raise ConfigError("--values", "portions must lie in [0, 1]")
    if args.axis == "eta" and any(not v > 0 for v in values):
        raise ConfigError("--values", "eta values must be > 0")
    if args.repeats < 1:
        raise ConfigError("--repeats", "must be >= 1")
    seeds = list(range(cfg.seed, cfg.seed + args.repeats))
    out = _out_dir(args, cfg)
    rows = _sweep_rows(cfg, args, values, seeds)
    ok = [r for r in rows if not r["failure"]]
    columns = list(dict.fromkeys(k for r in ok + rows for k in r))
    rows = [{k: r.get(k, "") for k in columns} for r in rows]
    _write_table(out / f"sweep_{args.axis}.csv", rows)
    for r in rows:
        print(", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in r.items()
                        if k != "config_digest"))
    if args.axis == "m" and len(ok) > 1:
        print(f"rank correlation(m, sum) = {m_trend(ok):.3f}")
    if args.svg and ok:
        x = args.axis
        if x == "m":
            ys, ylabel = {"cumulative sum": [r["sum_mean"] for r in ok]}, "mean cumulative sum"
        elif x == "portion":
            ys = {"bound": [r["bound_mean"] for r in ok], "test": [r["test_mean"] for r in ok],
                  "train S": [r["train_S_mean"] for r in ok]}
            ylabel = "risk / bound"
        else:
            ys, ylabel = {"bound": [r["bound_mean"] for r in ok]}, "bound total"
        svg = line_chart([r[x] for r in ok], ys, f"sweep over {x}", x, ylabel)
        (out / f"sweep_{args.axis}.svg").write_text(svg)
    print(f"wrote {out}")
    return EXIT_OK if len(ok) == len(rows) else EXIT_RUNTIME


def cmd_verify(args) -> int:
    reports = run_suite(args.selector, inject_bug=args.inject_bug)
    for rep in reports:
        print(rep.line())
    if args.out:
        out = _out_dir(args)
        (out / "verification.json").write_text(json.dumps([r.as_dict() for r in reports], indent=2) + "\n")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VERIFY


def cmd_datagen(args) -> int:
    out = _out_dir(args)
    seed = args.seed if args.seed is not None else 0
    if args.kind == "blobs":
        ds = synth_blobs(args.n, args.dim, args.classes, args.separation, seed)
        if args.portion:
            ds = corrupt_labels(ds, args.portion, seed + 1)
        ds.to_csv(out / "blobs.csv")
        print(f"wrote {out / 'blobs.csv'}")
    elif args.kind == "idx":
        images, labels = synth_idx_images(args.n, num_classes=args.classes, seed=seed)
        write_idx(out / "images-idx3-ubyte", out / "labels-idx1-ubyte", images, labels)
        print(f"wrote {out / 'images-idx3-ubyte'} and {out / 'labels-idx1-ubyte'}")
    else:
        if not args.csv:
            raise ConfigError("--csv", "corrupt needs an input CSV")
        ds = Dataset.from_csv(args.csv)
        corrupt_labels(ds, args.portion, seed).to_csv(out / "corrupted.csv")
        print(f"wrote {out / 'corrupted.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="floorpac", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="YAML or JSON run description")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")

    def bound_flags(sp):
        sp.add_argument("--theorem", choices=THEOREMS)
        sp.add_argument("--eta", type=float)
        sp.add_argument("--delta", type=float)

    tr = sub.add_parser("train", help="run one configured training job and certify it")
    common(tr)
    bound_flags(tr)
    tr.add_argument("--svg", action="store_true")
    tr.set_defaults(func=cmd_train)

    ce = sub.add_parser("certify", help="certify a saved trajectory")
    ce.add_argument("trajectory", help="path prefix of trajectory.csv/.json")
    common(ce, config=False)
    bound_flags(ce)
    ce.add_argument("--extra", action="append", help="extra theorem input, key=value")
    ce.set_defaults(func=cmd_certify)

    sw = sub.add_parser("sweep", help="sweep m, label-noise portion or eta")
    common(sw)
    bound_flags(sw)
    sw.add_argument("--axis", choices=["m", "portion", "eta"], required=True)
    sw.add_argument("--values", required=True, help="comma-separated axis values")
    sw.add_argument("--repeats", type=int, default=1)
    sw.add_argument("--svg", action="store_true")
    sw.set_defaults(func=cmd_sweep)

    ve = sub.add_parser("verify", help="run the lemma verifiers")
    ve.add_argument("selector", nargs="?", default="all", choices=["all", *SUITE])
    ve.add_argument("--inject-bug", action="store_true", help="negative control: must fail")
    ve.add_argument("--out")
    ve.set_defaults(func=cmd_verify)

    dg = sub.add_parser("datagen", help="write synthetic datasets")
    dg.add_argument("kind", choices=["blobs", "idx", "corrupt"])
    common(dg, config=False)
    dg.add_argument("--n", type=int, default=2000)
    dg.add_argument("--dim", type=int, default=2)
    dg.add_argument("--classes", type=int, default=3)
    dg.add_argument("--separation", type=float, default=4.0)
    dg.add_argument("--portion", type=float, default=0.0)
    dg.add_argument("--csv")
    dg.set_defaults(func=cmd_datagen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MissingQuantityError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
