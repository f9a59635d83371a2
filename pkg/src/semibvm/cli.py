"""Command-line front end.

Subcommands: simulate (data only), fit (one dataset, one estimator),
table1, bvm-sweep, lan-sweep.  Exit codes: 0 success, 2 configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .baselines import gaussian_ml_mixed
from .exceptions import ConfigError, SemibvmError
from .harness import (
    ExperimentConfig,
    apply_preset,
    default_threads,
    emit_bvm_reports,
    emit_lan_results,
    emit_table,
    load_config,
    run_bvm_sweep,
    run_lan_sweep,
    run_table1,
)
from .mixed import generate_mixed, read_mixed_csv, write_mixed_csv
from .regression import (
    generate_regression,
    read_regression_csv,
    write_regression_csv,
)
from .samplers import (
    fit_b1_mixed,
    fit_b2_mixed,
    fit_b2_regression,
    fit_series_regression,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML or JSON experiment config")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--replications", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--preset", choices=("desk", "paper"))


def _build_config(args, scenario: str) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
        if cfg.scenario != scenario:
            cfg = replace(cfg, scenario=scenario)
    else:
        defaults = {"scenario": scenario}
        if scenario == "bvm-sweep":
            defaults.update(laws=("E4",), estimators=("B2",), replications=20)
        elif scenario == "lan-sweep":
            defaults.update(laws=("E4",), estimators=("B2",), replications=50)
        cfg = ExperimentConfig(**defaults)
    if args.preset:
        cfg = apply_preset(cfg, args.preset)
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if args.replications is not None:
        cfg = replace(cfg, replications=args.replications)
    threads = args.threads if args.threads is not None else default_threads()
    cfg = replace(cfg, threads=threads, out_dir=args.out)
    return cfg


def _cmd_simulate(args) -> int:
    rng = np.random.default_rng(args.seed or 0)
    theta0 = tuple(float(v) for v in args.theta0.split(","))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.kind == "mixed":
        data = generate_mixed(args.n, args.m, theta0, args.sigma_b2,
                              args.law, rng)
        write_mixed_csv(data, out)
    else:
        data = generate_regression(args.n, len(theta0), theta0, args.law, rng)
        write_regression_csv(data, out)
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_fit(args) -> int:
    out_prefix = args.out
    Path(out_prefix).parent.mkdir(parents=True, exist_ok=True)
    from .samplers import SamplerConfig

    sampler = SamplerConfig(seed=args.seed or 0)
    if args.kind == "mixed":
        data = read_mixed_csv(args.data)
        if args.estimator == "F":
            fit = gaussian_ml_mixed(data)
            Path(f"{out_prefix}.json").write_text(fit.to_json())
            print(f"wrote {out_prefix}.json")
            return EXIT_OK
        if args.estimator == "B1":
            chain = fit_b1_mixed(data, sampler)
        elif args.estimator == "B2":
            chain = fit_b2_mixed(data, sampler)
        else:
            raise ConfigError(
                f"estimator {args.estimator!r} unavailable for mixed data"
            )
    else:
        data = read_regression_csv(args.data)
        if args.estimator == "B2":
            chain = fit_b2_regression(data, sampler)
        elif args.estimator == "series":
            chain = fit_series_regression(data, sampler)
        else:
            raise ConfigError(
                f"estimator {args.estimator!r} unavailable for regression data"
            )
    csv_path, json_path = chain.save(out_prefix)
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def _cmd_table1(args) -> int:
    cfg = _build_config(args, "table1")
    table = run_table1(cfg)
    for path in emit_table(table, cfg.out_dir or args.out):
        print(f"wrote {path}")
    for row in table.rows():
        rel = row.get("rel_eff", float("nan"))
        print(f"{row['law']:>3} {row['estimator']:>6}  "
              f"MSE={row['mse']:.4f}  rel.eff={rel:.2f}")
    return EXIT_OK


def _cmd_bvm_sweep(args) -> int:
    cfg = _build_config(args, "bvm-sweep")
    reports = run_bvm_sweep(cfg)
    for path in emit_bvm_reports(reports, cfg.out_dir or args.out):
        print(f"wrote {path}")
    for n in cfg.n_ladder:
        ks = np.concatenate([r.ks_coordinates for r in reports if r.n == n])
        print(f"n={n:>5}  median KS={np.median(ks):.4f}")
    return EXIT_OK


def _cmd_lan_sweep(args) -> int:
    cfg = _build_config(args, "lan-sweep")
    results = run_lan_sweep(cfg)
    for path in emit_lan_results(results, cfg.out_dir or args.out):
        print(f"wrote {path}")
    for n in sorted(results):
        print(f"n={n:>5}  median max|remainder|={np.median(results[n]):.4g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semibvm",
        description="Symmetric-error regression/mixed models: simulation "
                    "studies and posterior-normality diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a dataset CSV")
    sim.add_argument("--kind", choices=("regression", "mixed"),
                     default="mixed")
    sim.add_argument("--law", default="E1")
    sim.add_argument("--n", type=int, default=20)
    sim.add_argument("--m", type=int, default=5)
    sim.add_argument("--theta0", default="-1,1")
    sim.add_argument("--sigma-b2", dest="sigma_b2", type=float, default=1.0)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", default="dataset.csv")
    sim.set_defaults(func=_cmd_simulate)

    fit = sub.add_parser("fit", help="fit one estimator to a dataset CSV")
    fit.add_argument("--data", required=True)
    fit.add_argument("--kind", choices=("regression", "mixed"),
                     default="mixed")
    fit.add_argument("--estimator", choices=("F", "B1", "B2", "series"),
                     default="B2")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--out", default="fit")
    fit.set_defaults(func=_cmd_fit)

    for name, func in (("table1", _cmd_table1),
                       ("bvm-sweep", _cmd_bvm_sweep),
                       ("lan-sweep", _cmd_lan_sweep)):
        cmd = sub.add_parser(name)
        _add_common(cmd)
        cmd.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc.strerror}: {exc.filename}", file=sys.stderr)
        return EXIT_CONFIG
    except (SemibvmError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
