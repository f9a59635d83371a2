"""Replication engine for the simulation study and the BvM/LAN sweeps.

Every replication derives its own random stream from the master seed and
the replication index through numpy's splittable SeedSequence spawn keys,
so results are bit-identical regardless of worker count or scheduling;
all estimators within one replication see the same dataset (a paired
design, which reduces comparison variance without biasing per-method
mean squared error).
"""

from __future__ import annotations

import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import gaussian_ml_mixed
from .diagnostics import (
    BvmReport,
    ball_radius_h_grid,
    bvm_distance,
    delta_n,
    fisher_regression,
    lan_remainder,
)
from .error_laws import ERROR_LAW_TAGS, make_error_law
from .exceptions import ConfigError
from .mixed import generate_mixed
from .regression import generate_regression
from .samplers import (
    SamplerConfig,
    fit_b1_mixed,
    fit_b2_mixed,
    fit_b2_regression,
    fit_series_regression,
)

SCENARIOS = ("table1", "bvm-sweep", "lan-sweep", "custom")
ESTIMATORS = ("F", "B1", "B2", "series")

DEFAULT_MASTER_SEED = 20240817


def derive_seed(master_seed: int, *key: int) -> int:
    """Deterministic child seed from a master seed and an index path."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(key))
    return int(ss.generate_state(1, np.uint64)[0])


def derive_rng(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(master_seed, spawn_key=tuple(key))
    )


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "table1"
    laws: tuple[str, ...] = ERROR_LAW_TAGS
    n: int = 20
    m: int = 5
    p: int = 2
    theta0: tuple[float, ...] = (-1.0, 1.0)
    sigma_b2: float = 1.0
    replications: int = 100
    estimators: tuple[str, ...] = ("F", "B1", "B2")
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    master_seed: int = DEFAULT_MASTER_SEED
    threads: int = 1
    out_dir: str | None = None
    preset: str = "desk"
    n_ladder: tuple[int, ...] = (100, 400, 1600)
    h_radius: float = 2.0
    failure_budget: float = 0.02

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        for law in self.laws:
            if law not in ERROR_LAW_TAGS:
                raise ConfigError(f"unknown error law {law!r}")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not self.estimators:
            raise ConfigError("estimator set must be nonempty")
        for est in self.estimators:
            if est not in ESTIMATORS:
                raise ConfigError(f"unknown estimator {est!r}")
        if len(self.theta0) != self.p:
            raise ConfigError("theta0 dimension must match p")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    def echo(self) -> dict:
        d = asdict(self)
        d["sampler"] = self.sampler.echo()
        return d


def apply_preset(cfg: ExperimentConfig, preset: str) -> ExperimentConfig:
    """desk: N=100 with the documented widened tolerances; paper: N=300."""
    if preset == "desk":
        return replace(cfg, replications=100, preset="desk")
    if preset == "paper":
        return replace(cfg, replications=300, preset="paper")
    raise ConfigError(f"unknown preset {preset!r}")


def load_config(path: str) -> ExperimentConfig:
    """Read an ExperimentConfig from a TOML or JSON file."""
    text = Path(path).read_bytes()
    if path.endswith(".toml"):
        if sys.version_info >= (3, 11):
            import tomllib as toml
        else:
            import tomli as toml
        raw = toml.loads(text.decode())
    else:
        raw = json.loads(text)
    sampler_raw = raw.pop("sampler", {})
    dpm_raw = sampler_raw.pop("dpm", None)
    series_raw = sampler_raw.pop("series", None)
    try:
        if dpm_raw is not None:
            from .priors import DpmSpec

            sampler_raw["dpm"] = DpmSpec(**dpm_raw)
        if series_raw is not None:
            from .priors import SeriesSpec

            sampler_raw["series"] = SeriesSpec(**series_raw)
        for key in ("atom_proposal_scale",):
            if key in sampler_raw:
                sampler_raw[key] = tuple(sampler_raw[key])
        sampler = SamplerConfig(**sampler_raw)
        for key in ("laws", "estimators", "theta0", "n_ladder"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return ExperimentConfig(sampler=sampler, **raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Table-1 style study
# ---------------------------------------------------------------------------


@dataclass
class ResultTable:
    """MSE and relative efficiency per (law, estimator)."""

    theta0: np.ndarray
    laws: tuple[str, ...]
    estimators: tuple[str, ...]
    sq_errors: dict   # (law, estimator) -> (reps,) array of |theta_hat-theta0|^2
    estimates: dict   # (law, estimator) -> (reps, p) array
    failures: dict    # law -> list of (rep, message)
    config: dict = field(default_factory=dict)

    def mse(self, law: str, estimator: str) -> float:
        return float(np.mean(self.sq_errors[(law, estimator)]))

    def mc_se(self, law: str, estimator: str) -> float:
        e = self.sq_errors[(law, estimator)]
        return float(np.std(e, ddof=1) / np.sqrt(e.size))

    def relative_efficiency(self, law: str, estimator: str,
                            reference: str = "B2") -> float:
        return self.mse(law, estimator) / self.mse(law, reference)

    def rows(self, reference: str = "B2") -> list[dict]:
        out = []
        for law in self.laws:
            for est in self.estimators:
                row = {
                    "law": law,
                    "estimator": est,
                    "mse": self.mse(law, est),
                    "mc_se": self.mc_se(law, est),
                    "n_reps": int(self.sq_errors[(law, est)].size),
                }
                if reference in self.estimators:
                    row["rel_eff"] = self.relative_efficiency(law, est, reference)
                out.append(row)
        return out


def _fit_one_estimator(estimator: str, data, sampler: SamplerConfig,
                       seed: int) -> np.ndarray:
    cfg = replace(sampler, seed=seed)
    if estimator == "F":
        return gaussian_ml_mixed(data).theta
    if estimator == "B1":
        return fit_b1_mixed(data, cfg).posterior_mean()
    if estimator == "B2":
        return fit_b2_mixed(data, cfg).posterior_mean()
    raise ConfigError(
        f"estimator {estimator!r} is not available for the mixed-model study"
    )


def _table1_task(args):
    cfg_dict, law_idx, rep = args
    cfg: ExperimentConfig = cfg_dict
    law = cfg.laws[law_idx]
    data_rng = derive_rng(cfg.master_seed, law_idx, rep, 0)
    data = generate_mixed(cfg.n, cfg.m, cfg.theta0, cfg.sigma_b2, law, data_rng)
    theta0 = np.asarray(cfg.theta0, float)
    result = {}
    for e_idx, est in enumerate(cfg.estimators):
        seed = derive_seed(cfg.master_seed, law_idx, rep, 1 + e_idx)
        try:
            theta_hat = _fit_one_estimator(est, data, cfg.sampler, seed)
            result[est] = (np.asarray(theta_hat, float),
                           float(np.sum((theta_hat - theta0) ** 2)), None)
        except Exception as exc:  # recorded, budgeted in the merge step
            result[est] = (None, None, f"{type(exc).__name__}: {exc}")
    return law_idx, rep, result


def _run_tasks(tasks, worker, threads: int):
    if threads <= 1:
        return [worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, tasks, chunksize=1))


def run_table1(cfg: ExperimentConfig) -> ResultTable:
    """Paired replication study of the estimators over the error laws."""
    if cfg.scenario != "table1":
        raise ConfigError("run_table1 requires scenario='table1'")
    tasks = [(cfg, li, r) for li in range(len(cfg.laws))
             for r in range(cfg.replications)]
    outputs = _run_tasks(tasks, _table1_task, cfg.threads)
    outputs.sort(key=lambda t: (t[0], t[1]))

    sq_errors, estimates, failures = {}, {}, {law: [] for law in cfg.laws}
    for law in cfg.laws:
        for est in cfg.estimators:
            sq_errors[(law, est)] = []
            estimates[(law, est)] = []
    for law_idx, rep, result in outputs:
        law = cfg.laws[law_idx]
        messages = [msg for _, _, msg in result.values() if msg]
        if messages:
            failures[law].append((rep, "; ".join(messages)))
            continue  # paired design: drop the whole replication
        for est in cfg.estimators:
            theta_hat, sq, _ = result[est]
            sq_errors[(law, est)].append(sq)
            estimates[(law, est)].append(theta_hat)

    for law in cfg.laws:
        n_failed = len(failures[law])
        if n_failed > cfg.failure_budget * cfg.replications:
            detail = "; ".join(f"rep {r}: {m}" for r, m in failures[law][:5])
            raise RuntimeError(
                f"{n_failed}/{cfg.replications} replications failed for "
                f"{law} (budget {cfg.failure_budget:.0%}): {detail}"
            )
    return ResultTable(
        theta0=np.asarray(cfg.theta0, float),
        laws=cfg.laws,
        estimators=cfg.estimators,
        sq_errors={k: np.asarray(v, float) for k, v in sq_errors.items()},
        estimates={k: np.asarray(v, float) for k, v in estimates.items()},
        failures=failures,
        config=cfg.echo(),
    )


# ---------------------------------------------------------------------------
# BvM and LAN sweeps
# ---------------------------------------------------------------------------


def _bayes_estimator(cfg: ExperimentConfig) -> str:
    for est in cfg.estimators:
        if est in ("B2", "series"):
            return est
    raise ConfigError("sweep scenarios need a Bayesian estimator (B2 or series)")


def _bvm_task(args):
    from .exceptions import UnreliableChainError

    cfg, n_idx, rep = args
    n = cfg.n_ladder[n_idx]
    law = cfg.laws[0]
    eta0 = make_error_law(law)
    rng = derive_rng(cfg.master_seed, n_idx, rep, 0)
    data = generate_regression(n, cfg.p, cfg.theta0, law, rng)
    est = _bayes_estimator(cfg)
    info = fisher_regression(eta0, eta0, data.design_matrix)
    delta = delta_n(data, cfg.theta0, eta0, info)
    # An occasional slow-mixing chain fails the ESS gate; rerun it longer
    # (deterministically: the retry path depends only on the seeds).
    for attempt in range(3):
        seed = derive_seed(cfg.master_seed, n_idx, rep, 1 + attempt)
        factor = 2**attempt
        sampler = replace(
            cfg.sampler,
            seed=seed,
            iterations=cfg.sampler.iterations * factor,
            burn_in=cfg.sampler.burn_in * factor,
        )
        if est == "B2":
            chain = fit_b2_regression(data, sampler)
        else:
            chain = fit_series_regression(data, sampler)
        try:
            report = bvm_distance(chain, cfg.theta0, delta, info, n)
            break
        except UnreliableChainError:
            if attempt == 2:
                raise
    report.extra = {"law": law, "rep": rep, "estimator": est,
                    "attempts": attempt + 1}
    return n_idx, rep, report


def run_bvm_sweep(cfg: ExperimentConfig) -> list[BvmReport]:
    """Fit the Bayesian estimator over the n-ladder and report KS distances
    between the standardized posterior and its reference normal."""
    if cfg.scenario != "bvm-sweep":
        raise ConfigError("run_bvm_sweep requires scenario='bvm-sweep'")
    tasks = [(cfg, ni, r) for ni in range(len(cfg.n_ladder))
             for r in range(cfg.replications)]
    outputs = _run_tasks(tasks, _bvm_task, cfg.threads)
    outputs.sort(key=lambda t: (t[0], t[1]))
    return [rep for _, _, rep in outputs]


def _lan_task(args):
    cfg, n_idx, rep = args
    n = cfg.n_ladder[n_idx]
    law = cfg.laws[0]
    eta = make_error_law(law)
    rng = derive_rng(cfg.master_seed, n_idx, rep, 0)
    data = generate_regression(n, cfg.p, cfg.theta0, law, rng)
    info = fisher_regression(eta, eta, data.design_matrix)
    grid = ball_radius_h_grid(cfg.p, cfg.h_radius)
    rem = lan_remainder(data, eta, cfg.theta0, grid, info)
    return n_idx, rep, float(np.max(np.abs(rem)))


def run_lan_sweep(cfg: ExperimentConfig) -> dict[int, np.ndarray]:
    """Max absolute LAN remainder over |h| <= h_radius per replication,
    keyed by sample size."""
    if cfg.scenario != "lan-sweep":
        raise ConfigError("run_lan_sweep requires scenario='lan-sweep'")
    tasks = [(cfg, ni, r) for ni in range(len(cfg.n_ladder))
             for r in range(cfg.replications)]
    outputs = _run_tasks(tasks, _lan_task, cfg.threads)
    outputs.sort(key=lambda t: (t[0], t[1]))
    result: dict[int, list[float]] = {n: [] for n in cfg.n_ladder}
    for n_idx, _, value in outputs:
        result[cfg.n_ladder[n_idx]].append(value)
    return {n: np.asarray(v) for n, v in result.items()}


# ---------------------------------------------------------------------------
# Output emission
# ---------------------------------------------------------------------------


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def emit_table(table: ResultTable, out_dir: str) -> list[str]:
    """table1.csv (summary), replications.csv (raw), config.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "table1.csv"
    with open(path, "w") as fh:
        fh.write("law,estimator,mse,rel_eff,mc_se,n_reps\n")
        for row in table.rows():
            fh.write(
                f"{row['law']},{row['estimator']},{_fmt(row['mse'])},"
                f"{_fmt(row.get('rel_eff', float('nan')))},"
                f"{_fmt(row['mc_se'])},{row['n_reps']}\n"
            )
    written.append(str(path))

    path = out / "replications.csv"
    p = table.theta0.size
    with open(path, "w") as fh:
        cols = ",".join(f"theta{j + 1}" for j in range(p))
        fh.write(f"law,estimator,rep,{cols},sq_error\n")
        for (law, est), arr in sorted(table.estimates.items()):
            sq = table.sq_errors[(law, est)]
            for r in range(arr.shape[0]):
                vals = ",".join(_fmt(v) for v in arr[r])
                fh.write(f"{law},{est},{r},{vals},{_fmt(sq[r])}\n")
    written.append(str(path))

    path = out / "config.json"
    with open(path, "w") as fh:
        json.dump(table.config, fh, indent=2, default=str)
    written.append(str(path))
    return written


def read_table_csv(path: str) -> list[dict]:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            parts = line.strip().split(",")
            row = dict(zip(header, parts))
            for key in ("mse", "rel_eff", "mc_se"):
                row[key] = float(row[key])
            row["n_reps"] = int(row["n_reps"])
            rows.append(row)
    return rows


def emit_bvm_reports(reports: list[BvmReport], out_dir: str) -> list[str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / "bvm_ks.csv"
    with open(path, "w") as fh:
        fh.write("n,rep,coordinate,ks,ess\n")
        for rep in reports:
            for j, ks in enumerate(rep.ks_coordinates):
                fh.write(
                    f"{rep.n},{rep.extra.get('rep', -1)},{j + 1},"
                    f"{_fmt(ks)},{_fmt(rep.ess[j])}\n"
                )
    written.append(str(path))
    for i, rep in enumerate(reports):
        p = out / f"bvm_report_{rep.n}_{rep.extra.get('rep', i)}.json"
        p.write_text(rep.to_json())
        written.append(str(p))
    return written


def emit_lan_results(results: dict[int, np.ndarray], out_dir: str) -> list[str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "lan_remainders.csv"
    with open(path, "w") as fh:
        fh.write("n,rep,max_abs_remainder\n")
        for n in sorted(results):
            for r, v in enumerate(results[n]):
                fh.write(f"{n},{r},{_fmt(v)}\n")
    return [str(path)]


def default_threads() -> int:
    return max(1, os.cpu_count() or 1)
