"""Command-line surface and experiment orchestration.

Configuration is a flat key-value text file (``key = value`` per line,
``#`` comments); CLI flags override file values.  Results are emitted as
one self-describing JSON record per line (append-friendly), or as an
aligned table with ``--format table``.  Every record embeds the config
hash, seed, composed privacy spend, and artifact version, and re-running
any command with identical config and seed yields byte-identical output.

Exit codes: 0 success, 2 invalid config, 3 infeasible budget,
4 experiment failure.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import click
import numpy as np

from dpscale import __version__
from dpscale.accounting import (
    DpBudget,
    GdpBudget,
    InfeasibleBudgetError,
    InsufficientBudgetError,
    calibrate_sigma,
    dp_to_gdp,
    plan_budget,
)
from dpscale.data import BlobSpec, CsvParseError, gen_blobs, load_csv, write_csv
from dpscale.hpo import (
    SearchSpace,
    SweepFailedError,
    default_grid,
    grid_search,
    random_search,
    rerr,
    run_adaptive_hpo,
    sweep,
    UndefinedMetricError,
)
from dpscale.optimizer import DivergedError, TrainConfig, dp_gd_train
from dpscale.theorycheck import QuadraticProblem, radius_experiment, softmax_hessian_probe

EXIT_INVALID_CONFIG = 2
EXIT_INFEASIBLE_BUDGET = 3
EXIT_EXPERIMENT_FAILURE = 4


def _fmt(value):
    """17-significant-digit decimal strings for budget values."""
    return f"{value:.17g}"


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse a flat ``key = value`` config file; '#' starts a comment."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


class Settings:
    """Merged config-file values and CLI flag overrides."""

    def __init__(self, config_path: str | None, overrides: dict):
        self.values: dict = {}
        if config_path:
            self.values.update(read_config_file(config_path))
        for key, value in overrides.items():
            if value is not None:
                self.values[key] = value

    def get(self, key: str, cast, default=None):
        if key not in self.values:
            if default is None:
                raise ValueError(f"missing required config key {key!r}")
            return default
        value = self.values[key]
        if cast is bool and isinstance(value, str):
            return value.lower() in ("1", "true", "yes", "on")
        return cast(value)

    def fingerprint(self) -> str:
        # The worker count never changes results, only scheduling; leaving
        # it out keeps reruns byte-identical at any parallelism.
        body = json.dumps(
            {k: str(v) for k, v in sorted(self.values.items()) if k != "workers"}
        )
        return hashlib.sha256(body.encode()).hexdigest()[:16]


def emit(records: list[dict], out: str | None, fmt: str) -> None:
    if fmt == "table":
        keys: list[str] = []
        for rec in records:
            for k in rec:
                if k not in keys:
                    keys.append(k)
        widths = {k: max(len(k), *(len(str(r.get(k, ""))) for r in records)) for k in keys}
        lines = ["  ".join(k.ljust(widths[k]) for k in keys)]
        for rec in records:
            lines.append("  ".join(str(rec.get(k, "")).ljust(widths[k]) for k in keys))
        text = "\n".join(lines) + "\n"
    else:
        text = "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in records)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _stamp(rec: dict, settings: Settings, seed: int, spent_mu: float | None) -> dict:
    rec["config_hash"] = settings.fingerprint()
    rec["seed"] = seed
    rec["spent_mu"] = spent_mu
    rec["version"] = __version__
    return rec


def run_command(fn):
    """Map domain errors onto the documented exit codes."""

    def wrapper(*args, **kwargs):
        try:
            fn(*args, **kwargs)
        except (InsufficientBudgetError, InfeasibleBudgetError) as exc:
            click.echo(f"infeasible budget: {exc}", err=True)
            sys.exit(EXIT_INFEASIBLE_BUDGET)
        except (ValueError, CsvParseError, FileNotFoundError) as exc:
            click.echo(f"invalid config: {exc}", err=True)
            sys.exit(EXIT_INVALID_CONFIG)
        except (DivergedError, SweepFailedError, UndefinedMetricError) as exc:
            click.echo(f"experiment failed: {exc}", err=True)
            sys.exit(EXIT_EXPERIMENT_FAILURE)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True), default=None, help="Flat key=value config file.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Base RNG seed.")(fn)
    fn = click.option("--workers", type=int, default=None, help="Worker pool size for independent trials.")(fn)
    fn = click.option("--out", type=click.Path(), default=None, help="Write records here instead of stdout.")(fn)
    fn = click.option("--format", "fmt", type=click.Choice(["lines", "table"]), default="lines")(fn)
    return fn


def _space(s: Settings) -> SearchSpace:
    return SearchSpace(
        eta_min=s.get("eta_min", float, 0.02),
        eta_max=s.get("eta_max", float, 0.2),
        T_min=s.get("T_min", int, 10),
        T_max=s.get("T_max", int, 100),
    )


def _datasets(s: Settings, seed: int):
    """Load train/test CSVs when given, else synthesize blobs."""
    train_path = s.values.get("train_csv")
    if train_path:
        header = s.get("csv_header", bool, False)
        train = load_csv(train_path, header=header)
        test_path = s.values.get("test_csv")
        test = load_csv(test_path, header=header) if test_path else None
        return train, test
    spec = BlobSpec(
        n_classes=s.get("blob_classes", int, 10),
        dim=s.get("blob_dim", int, 64),
        n_samples=s.get("blob_samples", int, 5000),
        separation=s.get("blob_separation", float, 4.0),
        noise_scale=s.get("blob_noise", float, 0.15),
        anisotropy=s.get("blob_anisotropy", float, 30.0),
        seed=s.get("blob_seed", int, seed + 1),
        split=s.get("blob_split", float, 0.8),
    )
    return gen_blobs(spec)


def _total_budget(s: Settings) -> DpBudget:
    return DpBudget(s.get("epsilon", float), s.get("delta", float, 1e-5))


@click.group()
@click.version_option(__version__)
def main():
    """Differentially private training and hyperparameter optimization."""


@main.command()
@common_options
@click.option("--mu", type=float, default=None, help="Target GDP parameter.")
@click.option("--epsilon", type=float, default=None)
@click.option("--delta", type=float, default=None)
@click.option("--steps", "-T", "steps", type=int, default=None)
@run_command
def calibrate(config_path, seed, workers, out, fmt, mu, epsilon, delta, steps):
    """Noise multiplier for a run of T steps at a target budget."""
    s = Settings(config_path, {"mu": mu, "epsilon": epsilon, "delta": delta, "steps": steps, "seed": seed})
    T = s.get("steps", int)
    if "mu" in s.values:
        budget = GdpBudget(s.get("mu", float))
    else:
        budget = dp_to_gdp(_total_budget(s))
    sigma = calibrate_sigma(budget, T)
    rec = _stamp(
        {"command": "calibrate", "mu": _fmt(budget.mu), "steps": T, "sigma": _fmt(sigma)},
        s, s.get("seed", int, 0), budget.mu,
    )
    emit([rec], out, fmt)


@main.command()
@common_options
@click.option("--epsilon", type=float, default=None, help="Total epsilon.")
@click.option("--delta", type=float, default=None, help="Total delta.")
@click.option("--eps1", type=float, default=None)
@click.option("--eps2", type=float, default=None)
@click.option("--n", "n_runs", type=int, default=None, help="Runs per sweep.")
@run_command
def plan(config_path, seed, workers, out, fmt, epsilon, delta, eps1, eps2, n_runs):
    """Split a total (epsilon, delta) budget into sweep and final budgets."""
    s = Settings(config_path, {"epsilon": epsilon, "delta": delta, "eps1": eps1, "eps2": eps2, "n": n_runs, "seed": seed})
    p = plan_budget(_total_budget(s), s.get("eps1", float, 0.1), s.get("eps2", float, 0.2), s.get("n", int, 3))
    rec = _stamp(
        {
            "command": "plan",
            "mu1": _fmt(p.mu1.mu),
            "mu2": _fmt(p.mu2.mu),
            "mu_f": _fmt(p.mu_f.mu),
            "eps_f": _fmt(p.eps_f),
            "n": p.n,
            "total_epsilon": _fmt(p.total.epsilon),
            "total_delta": _fmt(p.total.delta),
            "composed_mu": _fmt(p.composed().mu),
        },
        s, s.get("seed", int, 0), p.composed().mu,
    )
    emit([rec], out, fmt)


@main.command()
@common_options
@click.option("--eta", type=float, default=None)
@click.option("--steps", "-T", "steps", type=int, default=None)
@click.option("--sigma", type=float, default=None)
@click.option("--mu", type=float, default=None, help="Calibrate sigma from this mu.")
@run_command
def train(config_path, seed, workers, out, fmt, eta, steps, sigma, mu):
    """One DP-GD run on the configured dataset."""
    s = Settings(config_path, {"eta": eta, "steps": steps, "sigma": sigma, "mu": mu, "seed": seed})
    base_seed = s.get("seed", int, 0)
    T = s.get("steps", int)
    if "sigma" in s.values:
        noise = s.get("sigma", float)
    elif "mu" in s.values:
        noise = calibrate_sigma(GdpBudget(s.get("mu", float)), T)
    else:
        noise = 0.0
    train_set, test_set = _datasets(s, base_seed)
    config = TrainConfig(
        eta=s.get("eta", float),
        T=T,
        sigma=noise,
        momentum_rho=s.get("momentum", float, 0.9),
        free_step=s.get("free_step", bool, True),
        seed=base_seed,
    )
    result = dp_gd_train(train_set, config, test_set)
    rec = _stamp({"command": "train", **result.to_record()}, s, base_seed, result.mu)
    emit([rec], out, fmt)


@main.command("sweep")
@common_options
@click.option("--mu", type=float, default=None, help="Per-run GDP budget.")
@click.option("--n", "n_runs", type=int, default=None)
@run_command
def sweep_cmd(config_path, seed, workers, out, fmt, mu, n_runs):
    """n low-budget trials; report the best total step size r."""
    s = Settings(config_path, {"mu": mu, "n": n_runs, "seed": seed, "workers": workers})
    base_seed = s.get("seed", int, 0)
    train_set, _ = _datasets(s, base_seed)
    result = sweep(
        train_set,
        GdpBudget(s.get("mu", float)),
        s.get("n", int, 3),
        _space(s),
        base_seed,
        workers=s.get("workers", int, 1),
    )
    records = [
        _stamp(
            {"command": "sweep", "stage": 0, "trial": i, "r": t.r, "eta": t.eta,
             "steps": t.T, "score": t.score, "diverged": t.diverged},
            s, base_seed, result.mu.mu,
        )
        for i, t in enumerate(result.trials)
    ]
    records.append(_stamp({"command": "sweep", "best_r": result.best_r, "mu": _fmt(result.mu.mu)}, s, base_seed, result.mu.mu))
    emit(records, out, fmt)


def _run_hpo(s: Settings, base_seed: int, train_set, test_set):
    p = plan_budget(
        _total_budget(s),
        s.get("eps1", float, 0.1),
        s.get("eps2", float, 0.2),
        s.get("n", int, 3),
    )
    return run_adaptive_hpo(
        train_set, test_set, p, _space(s), base_seed,
        degree=s.get("degree", int, 1),
        workers=s.get("workers", int, 1),
    )


@main.command()
@common_options
@click.option("--epsilon", type=float, default=None)
@click.option("--delta", type=float, default=None)
@click.option("--eps1", type=float, default=None)
@click.option("--eps2", type=float, default=None)
@click.option("--n", "n_runs", type=int, default=None)
@click.option("--degree", type=int, default=None)
@run_command
def hpo(config_path, seed, workers, out, fmt, epsilon, delta, eps1, eps2, n_runs, degree):
    """Adaptive linear-scaling HPO end to end."""
    s = Settings(config_path, {"epsilon": epsilon, "delta": delta, "eps1": eps1, "eps2": eps2,
                               "n": n_runs, "degree": degree, "seed": seed, "workers": workers})
    base_seed = s.get("seed", int, 0)
    train_set, test_set = _datasets(s, base_seed)
    report = _run_hpo(s, base_seed, train_set, test_set)
    rec = _stamp(
        {
            "command": "hpo",
            "r_star": report.r_star,
            "r_star_clamped": report.r_star_clamped,
            "sweep_best_r": [sw.best_r for sw in report.sweeps],
            "fit_coefficients": [float(c) for c in report.fit.coefficients],
            "eps_f": _fmt(report.plan.eps_f),
            "warnings": report.warnings,
            **report.final.to_record(),
        },
        s, base_seed, report.spent_mu,
    )
    emit([rec], out, fmt)


@main.command("random")
@common_options
@click.option("--epsilon", type=float, default=None)
@click.option("--delta", type=float, default=None)
@run_command
def random_cmd(config_path, seed, workers, out, fmt, epsilon, delta):
    """Random-search baseline: one full-budget run at a random r."""
    s = Settings(config_path, {"epsilon": epsilon, "delta": delta, "seed": seed})
    base_seed = s.get("seed", int, 0)
    train_set, test_set = _datasets(s, base_seed)
    total = _total_budget(s)
    result = random_search(train_set, test_set, total, _space(s), base_seed)
    rec = _stamp({"command": "random", **result.to_record()}, s, base_seed, dp_to_gdp(total).mu)
    emit([rec], out, fmt)


@main.command("grid")
@common_options
@click.option("--epsilon", type=float, default=None)
@click.option("--delta", type=float, default=None)
@click.option("--grid-points", type=int, default=None)
@run_command
def grid_cmd(config_path, seed, workers, out, fmt, epsilon, delta, grid_points):
    """Grid-search oracle: full-budget run per point, best test accuracy."""
    s = Settings(config_path, {"epsilon": epsilon, "delta": delta, "grid_points": grid_points,
                               "seed": seed, "workers": workers})
    base_seed = s.get("seed", int, 0)
    train_set, test_set = _datasets(s, base_seed)
    space = _space(s)
    total = _total_budget(s)
    outcome = grid_search(
        train_set, test_set, total, default_grid(space, s.get("grid_points", int, 10)),
        space, base_seed, workers=s.get("workers", int, 1),
    )
    records = [
        _stamp({"command": "grid", "trial": i, "r": r, "test_accuracy": acc,
                "non_private_selection": True}, s, base_seed, dp_to_gdp(total).mu)
        for i, (r, acc) in enumerate(outcome.trials)
    ]
    records.append(_stamp({"command": "grid", "best": True, "non_private_selection": True,
                           **outcome.best.to_record()}, s, base_seed, dp_to_gdp(total).mu))
    emit(records, out, fmt)


@main.command()
@common_options
@click.option("--epsilon", type=float, default=None)
@click.option("--delta", type=float, default=None)
@click.option("--seeds", type=str, default=None, help="Comma-separated seed list.")
@run_command
def compare(config_path, seed, workers, out, fmt, epsilon, delta, seeds):
    """Random search vs grid oracle vs adaptive HPO, with RERR."""
    s = Settings(config_path, {"epsilon": epsilon, "delta": delta, "seeds": seeds,
                               "seed": seed, "workers": workers})
    seed_list = [int(x) for x in str(s.get("seeds", str, "0,1,2,3,4")).split(",")]
    total = _total_budget(s)
    space = _space(s)
    grid = default_grid(space, s.get("grid_points", int, 10))
    records, rand_accs, oracle_accs, ours_accs = [], [], [], []
    for run_seed in seed_list:
        train_set, test_set = _datasets(s, run_seed)
        row = {"command": "compare", "seed": run_seed}
        try:
            rand = random_search(train_set, test_set, total, space, run_seed)
            oracle = grid_search(train_set, test_set, total, grid, space, run_seed,
                                 workers=s.get("workers", int, 1))
            report = _run_hpo(s, run_seed, train_set, test_set)
        except (DivergedError, SweepFailedError) as exc:
            row["error"] = str(exc)
            records.append(_stamp(row, s, run_seed, None))
            continue
        rand_accs.append(rand.test_accuracy)
        oracle_accs.append(oracle.best.test_accuracy)
        ours_accs.append(report.final.test_accuracy)
        row.update(random_accuracy=rand.test_accuracy,
                   oracle_accuracy=oracle.best.test_accuracy,
                   ours_accuracy=report.final.test_accuracy,
                   r_star=report.r_star)
        records.append(_stamp(row, s, run_seed, report.spent_mu))
    if rand_accs:
        mean = lambda xs: float(np.mean(xs))
        summary = {"command": "compare", "mean": True,
                   "random_accuracy": mean(rand_accs),
                   "oracle_accuracy": mean(oracle_accs),
                   "ours_accuracy": mean(ours_accs)}
        try:
            summary["rerr"] = rerr(mean(ours_accs), mean(rand_accs), mean(oracle_accs))
        except UndefinedMetricError:
            summary["rerr"] = None
        records.append(_stamp(summary, s, seed_list[0], None))
    emit(records, out, fmt)


@main.command()
@common_options
@click.option("--dim", type=int, default=None)
@click.option("--alpha", type=float, default=None)
@click.option("--beta", type=float, default=None)
@click.option("--eta", type=float, default=None)
@click.option("--sigma", type=float, default=None)
@click.option("--steps", "-T", "steps", type=int, default=None)
@click.option("--trials", type=int, default=None)
@run_command
def radius(config_path, seed, workers, out, fmt, dim, alpha, beta, eta, sigma, steps, trials):
    """Noisy-vs-clean GD divergence on a diagonal quadratic vs the bound."""
    s = Settings(config_path, {"dim": dim, "alpha": alpha, "beta": beta, "eta": eta,
                               "sigma": sigma, "steps": steps, "trials": trials, "seed": seed})
    base_seed = s.get("seed", int, 0)
    d = s.get("dim", int, 10)
    a = s.get("alpha", float, 1.0)
    b = s.get("beta", float, a)
    rng = np.random.default_rng(np.random.SeedSequence([base_seed & 0xFFFFFFFFFFFFFFFF, 8]))
    eigs = np.linspace(a, b, d) if d > 1 else np.array([a])
    problem = QuadraticProblem(eigenvalues=eigs, w_star=rng.normal(size=d))
    report = radius_experiment(
        problem,
        eta=s.get("eta", float, 0.5),
        sigma=s.get("sigma", float, 0.1),
        T=s.get("steps", int, 50),
        trials=s.get("trials", int, 1000),
        seed=base_seed,
    )
    emit([_stamp({"command": "radius", **report.to_record()}, s, base_seed, None)], out, fmt)


@main.command("probe-lipschitz")
@common_options
@click.option("--dim", type=int, default=None)
@click.option("--classes", type=int, default=None)
@click.option("--probes", type=int, default=None)
@run_command
def probe_lipschitz(config_path, seed, workers, out, fmt, dim, classes, probes):
    """Probe the softmax-gradient second derivative against its 1/4 cap."""
    s = Settings(config_path, {"dim": dim, "classes": classes, "probes": probes, "seed": seed})
    base_seed = s.get("seed", int, 0)
    report = softmax_hessian_probe(
        d=s.get("dim", int, 5),
        K=s.get("classes", int, 3),
        probes=s.get("probes", int, 100000),
        seed=base_seed,
    )
    rec = _stamp(
        {"command": "probe-lipschitz", "max_entry": report.max_entry,
         "constructed_entry": report.constructed_entry,
         "random_max": report.random_max, "probes": report.probes},
        s, base_seed, None,
    )
    emit([rec], out, fmt)


@main.command("gen-data")
@common_options
@click.option("--train-out", type=click.Path(), required=True)
@click.option("--test-out", type=click.Path(), required=True)
@run_command
def gen_data(config_path, seed, workers, out, fmt, train_out, test_out):
    """Synthesize blob datasets and write them as CSV."""
    s = Settings(config_path, {"seed": seed})
    base_seed = s.get("seed", int, 0)
    train_set, test_set = _datasets(s, base_seed)
    write_csv(train_out, train_set)
    write_csv(test_out, test_set)
    rec = _stamp(
        {"command": "gen-data", "train_csv": str(train_out), "test_csv": str(test_out),
         "train_samples": train_set.n_samples, "test_samples": test_set.n_samples},
        s, base_seed, None,
    )
    emit([rec], out, fmt)


if __name__ == "__main__":
    main()
