"""Command-line driver: ``noniid verify|moments|test|power|divergence``.

Exit codes: 0 success, 2 malformed configuration or input, 3 numerical
violation, 4 dense-dimension cap exceeded.  Every report embeds the resolved
configuration (seed included) and the library version; feeding that
configuration back through ``--config`` reproduces the report.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import click
import numpy as np

from . import __version__
from .distances import classical_divergences, quantum_divergences
from .efronstein import NumericalViolation
from .observables import (CLASSICAL_M, KINDS, KNOWN_M, MM_A, UNKNOWN_Z, DenseCapError,
                          InequalityViolation, ObservableKind, exact_moments)
from .simulate import estimate_success
from .states import (ProductEnsemble, StateError, load_ensemble, maximally_mixed, perturb_ensemble,
                     random_ensemble, split_distribution, distribution_at_chi2)
from .testers import ChebyshevRule, epsilon_to_theta, load_calibration, required_T, run_trial
from .verify import SUITES, check_names, run_suites

COMMANDS = ("verify", "moments", "test", "power", "divergence")
EXIT_CONFIG, EXIT_VIOLATION, EXIT_CAP = 2, 3, 4
POWER_COLUMNS = ("T", "null_rate", "null_low", "null_high", "far_rate", "far_low", "far_high",
                 "trials", "seed", "theta", "far_mu")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    kind: str | None = None
    d: int | None = None
    T: list[int] | None = None
    theta: float | None = None
    epsilon: float | None = None
    trials: int | None = None
    seed: int | None = None
    states: str | None = None
    second: str | None = None
    sigma: str | None = None
    out: str | None = None
    calibration: str | None = None
    suites: list[str] = field(default_factory=list)
    count: int | None = None
    mutate: str | None = None
    far_factor: float = 2.0
    workers: int = 1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"command: expected one of {COMMANDS}, got {self.command!r}")
        if self.kind is not None and self.kind not in KINDS:
            raise ConfigError(f"kind: expected one of {KINDS}, got {self.kind!r}")
        if self.theta is not None and self.epsilon is not None:
            raise ConfigError("theta and epsilon are mutually exclusive")
        for name in ("d", "trials", "count", "workers"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, int) or isinstance(v, bool) or v < 1):
                raise ConfigError(f"{name}: expected a positive integer, got {v!r}")
        if self.seed is not None and (not isinstance(self.seed, int) or self.seed < 0):
            raise ConfigError(f"seed: expected a non-negative integer, got {self.seed!r}")
        if self.T is not None:
            if isinstance(self.T, int):
                self.T = [self.T]
            if (not isinstance(self.T, list) or not self.T
                    or not all(isinstance(t, int) and not isinstance(t, bool) and t >= 1 for t in self.T)):
                raise ConfigError(f"T: expected positive integers, got {self.T!r}")
            if any(b <= a for a, b in zip(self.T, self.T[1:])):
                raise ConfigError(f"T: sweep must be strictly increasing, got {self.T}")
        for name in ("theta", "epsilon"):
            v = getattr(self, name)
            if v is not None and not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                raise ConfigError(f"{name}: expected a positive number, got {v!r}")
        if not (isinstance(self.far_factor, (int, float)) and self.far_factor > 1):
            raise ConfigError(f"far_factor: expected a number > 1, got {self.far_factor!r}")
        for s in self.suites:
            if s not in SUITES:
                raise ConfigError(f"suites: unknown suite {s!r}; expected a subset of {SUITES}")

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config: expected a JSON object")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(obj) - names)
        if unknown:
            raise ConfigError(f"config: unknown fields {unknown}")
        if "command" not in obj:
            raise ConfigError("config: missing 'command'")
        return cls(**obj)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def load_config(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None


# --- helpers ----------------------------------------------------------------

def _need(cfg: ExperimentConfig, *names: str) -> None:
    missing = [n for n in names if getattr(cfg, n) is None]
    if missing:
        raise ConfigError(f"{cfg.command} needs {', '.join('--' + n for n in missing)}")


def _hypothesis(cfg: ExperimentConfig, d: int):
    """sigma (KNOWN_M), q (CLASSICAL_M) or None; default hypothesis is the uniform one."""
    if cfg.kind not in (KNOWN_M, CLASSICAL_M):
        return None
    sigma = load_ensemble(cfg.sigma).states[0] if cfg.sigma else maximally_mixed(d)
    if sigma.shape[0] != d:
        raise ConfigError(f"sigma has dimension {sigma.shape[0]}, expected {d}")
    return sigma if cfg.kind == KNOWN_M else np.diag(sigma).real.copy()


def _kind(cfg: ExperimentConfig, d: int) -> ObservableKind:
    try:
        return ObservableKind(cfg.kind, _hypothesis(cfg, d))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _theta(cfg: ExperimentConfig, d: int) -> float:
    if cfg.theta is not None:
        return float(cfg.theta)
    if cfg.epsilon is not None:
        return epsilon_to_theta(cfg.kind, cfg.epsilon, d)
    raise ConfigError(f"{cfg.command} needs --theta or --epsilon")


def _ensembles(cfg: ExperimentConfig, T: int | None, d: int | None):
    """(ensemble, second) from files, or random ones from --dim/--T/--seed."""
    if cfg.states:
        ens = load_ensemble(cfg.states)
        second = load_ensemble(cfg.second) if cfg.second else None
    else:
        if d is None or T is None or cfg.seed is None:
            raise ConfigError(f"{cfg.command} needs --states, or --dim, --T and --seed")
        mode = "classical_dirichlet" if cfg.kind == CLASSICAL_M else "ginibre_mixed"
        ens = random_ensemble(d, T, mode, cfg.seed)
        second = random_ensemble(d, T, mode, cfg.seed + 1) if cfg.kind == UNKNOWN_Z else None
    if cfg.kind == UNKNOWN_Z and second is None:
        raise ConfigError("UNKNOWN_Z needs --second")
    return ens, second


def _calibration(cfg: ExperimentConfig) -> dict:
    try:
        return load_calibration(cfg.calibration)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        raise ConfigError(f"calibration file: {exc}") from None


def _envelope(cfg: ExperimentConfig, report) -> dict:
    return {"version": __version__, "command": cfg.command, "seed": cfg.seed,
            "config": cfg.to_dict(), "report": report}


def _emit(cfg: ExperimentConfig, text: str) -> None:
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        click.echo(text, nl=not text.endswith("\n"))


def _json(obj) -> str:
    def clean(x):
        if isinstance(x, float) and not math.isfinite(x):
            return None
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        return x
    return json.dumps(clean(obj), indent=2, sort_keys=True)


# --- commands ---------------------------------------------------------------

def cmd_verify(cfg: ExperimentConfig) -> int:
    names = cfg.suites or list(SUITES)
    if cfg.mutate and cfg.mutate not in check_names():
        raise ConfigError(f"mutate: unknown check {cfg.mutate!r}")
    results = run_suites(names, count=cfg.count, seed=cfg.seed or 0, mutate=cfg.mutate)
    rows = [row for r in results for row in r.rows()]
    report = {"passed": all(r.passed for r in results),
              "suites": [{"suite": r.suite, "instances": r.instances, "passed": r.passed} for r in results],
              "checks": rows}
    if cfg.out:
        Path(cfg.out).write_text(_json(_envelope(cfg, report)))
    for r in results:
        click.echo(f"{r.suite}: {r.instances} instances, {'PASS' if r.passed else 'FAIL'}")
        for row in r.rows():
            flag = "ok  " if row["violations"] == 0 else "FAIL"
            click.echo(f"  {flag} {row['check']:<28} n={row['count']:<6} violations={row['violations']:<4}"
                       f" worst lhs-rhs={row['worst_excess']:.3e}")
    return 0 if report["passed"] else EXIT_VIOLATION


def cmd_moments(cfg: ExperimentConfig) -> int:
    _need(cfg, "kind")
    sweep = cfg.T if cfg.T and len(cfg.T) > 1 and not cfg.states else None
    reports = []
    for T in sweep or [cfg.T[0] if cfg.T else None]:
        ens, second = _ensembles(cfg, T, cfg.d)
        kind = _kind(cfg, ens.d)
        reports.append(exact_moments(kind, ens, second).to_dict())
    if sweep:
        buf = io.StringIO()
        cols = ["T", "mu", "mean_exact", "var_exact", "bias", "paper_bias_bound", "var_bound_sum"]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in reports:
            w.writerow([r["T"], r["mu"], r["mean_exact"], r["var_exact"], r["bias"], r["paper_bias_bound"],
                        sum(r["paper_var_bound_terms"].values())])
        _emit(cfg, buf.getvalue())
    else:
        _emit(cfg, _json(_envelope(cfg, reports[0])))
    return 0


def cmd_test(cfg: ExperimentConfig) -> int:
    _need(cfg, "kind", "seed")
    ens, second = _ensembles(cfg, cfg.T[0] if cfg.T else None, cfg.d)
    kind = _kind(cfg, ens.d)
    rule = ChebyshevRule(_theta(cfg, ens.d))
    if kind.tag == CLASSICAL_M:
        dec = run_trial(kind, ens.diagonals(), rule, cfg.seed)
    else:
        dec = run_trial(kind, ens, rule, cfg.seed, second)
    _emit(cfg, _json(_envelope(cfg, dec.to_dict())))
    return 0


def power_instances(kind: ObservableKind, d: int, T: int, mu: float, seed: int):
    """(null, null_second, far, far_second) fixtures: heterogeneous null, far average at divergence mu."""
    if kind.tag == CLASSICAL_M:
        q = kind.hypothesis
        return (split_distribution(q, T, seed), None,
                split_distribution(distribution_at_chi2(q, mu, seed), T, seed + 1), None)
    if kind.tag == KNOWN_M:
        sigma = kind.hypothesis
        return (perturb_ensemble(sigma, 0.0, T, "coherent", seed), None,
                perturb_ensemble(sigma, mu, T, "pure_mix", seed + 1, measure="bures_chi2"), None)
    base = maximally_mixed(d)
    null = perturb_ensemble(base, 0.0, T, "coherent", seed)
    far = perturb_ensemble(base, mu, T, "pure_mix", seed + 1, measure="hs")
    if kind.tag == MM_A:
        return null, None, far, None
    other = perturb_ensemble(base, 0.0, T, "pure_mix", seed + 2)
    return null, other, far, other


def cmd_power(cfg: ExperimentConfig) -> int:
    _need(cfg, "kind", "d", "trials")
    if cfg.seed is None:
        raise ConfigError("power needs --seed")
    d = cfg.d
    kind = _kind(cfg, d)
    theta = _theta(cfg, d)
    rule = ChebyshevRule(theta)
    Ts = cfg.T or [required_T(kind, theta, d, kind.gamma, _calibration(cfg))]
    mu = cfg.far_factor * theta
    rows = []
    for T in Ts:
        null, null2, far, far2 = power_instances(kind, d, T, mu, cfg.seed)
        nrep, frep = estimate_success(kind, null, far, rule, cfg.trials, cfg.seed, null2, far2,
                                      workers=cfg.workers)
        rows.append(dict(zip(POWER_COLUMNS, (T, nrep.far_rate, nrep.wilson_low, nrep.wilson_high, frep.far_rate,
                                             frep.wilson_low, frep.wilson_high, cfg.trials, cfg.seed, theta, mu))))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=POWER_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    _emit(cfg, buf.getvalue())
    if cfg.out:
        # the CSV cannot carry the configuration, so a JSON sidecar does
        sidecar = Path(cfg.out).with_suffix(".json")
        sidecar.write_text(_json(_envelope(cfg, {"columns": list(POWER_COLUMNS), "rows": rows})))
    return 0


def cmd_divergence(cfg: ExperimentConfig) -> int:
    _need(cfg, "states", "sigma")
    rho = load_ensemble(cfg.states).states[0]
    sigma = load_ensemble(cfg.sigma).states[0]
    if rho.shape != sigma.shape:
        raise ConfigError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    report = {"quantum": quantum_divergences(rho, sigma).to_dict(),
              "classical": classical_divergences(np.diag(rho).real, np.diag(sigma).real).to_dict()}
    _emit(cfg, _json(_envelope(cfg, report)))
    return 0


RUNNERS = {"verify": cmd_verify, "moments": cmd_moments, "test": cmd_test, "power": cmd_power,
           "divergence": cmd_divergence}


def run_experiment(cfg: ExperimentConfig) -> int:
    """Run one command; returns the exit status."""
    try:
        return RUNNERS[cfg.command](cfg)
    except (ConfigError, StateError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_CONFIG
    except DenseCapError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_CAP
    except (NumericalViolation, InequalityViolation, ArithmeticError) as exc:
        click.echo(f"numerical violation: {exc}", err=True)
        return EXIT_VIOLATION


# --- click wiring -------------------------------------------------------------

def _parse_T(ctx, param, value):
    if value is None:
        return None
    try:
        return [int(x) for x in value.split(",")]
    except ValueError:
        raise click.BadParameter(f"expected an integer or a comma-separated list, got {value!r}")


def common(f):
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON ExperimentConfig; flags override it."),
        click.option("--kind", type=click.Choice(KINDS), default=None),
        click.option("--dim", "d", type=int, default=None),
        click.option("--T", "T", callback=_parse_T, default=None, help="Sample count, or a comma-separated sweep."),
        click.option("--theta", type=float, default=None),
        click.option("--epsilon", type=float, default=None),
        click.option("--trials", type=int, default=None),
        click.option("--seed", type=int, default=None),
        click.option("--states", type=click.Path(dir_okay=False), default=None),
        click.option("--second", type=click.Path(dir_okay=False), default=None, help="Second ensemble (UNKNOWN_Z)."),
        click.option("--sigma", type=click.Path(dir_okay=False), default=None),
        click.option("--out", type=click.Path(dir_okay=False), default=None),
        click.option("--calibration", type=click.Path(dir_okay=False), default=None),
    ]
    for opt in reversed(options):
        f = opt(f)
    return f


def _resolve(command: str, config_path, **flags) -> ExperimentConfig:
    base = load_config(config_path) if config_path else {"command": command}
    if base.get("command", command) != command:
        raise ConfigError(f"config is for {base['command']!r}, not {command!r}")
    base["command"] = command
    for k, v in flags.items():
        if v is not None and v != () and v != []:
            base[k] = v
    if flags.get("theta") is not None:
        base.pop("epsilon", None)
    if flags.get("epsilon") is not None:
        base.pop("theta", None)
    return ExperimentConfig.from_dict(base)


def _run(command: str, **kw) -> None:
    try:
        cfg = _resolve(command, **kw)
    except (ConfigError, TypeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    sys.exit(run_experiment(cfg))


@click.group()
@click.version_option(__version__)
def main():
    """Non-iid identity testing: invariant checks, exact moments and power simulations."""


@main.command()
@click.argument("suite", type=click.Choice(SUITES + ("all",)), default="all")
@click.option("--count", type=int, default=None, help="Random instances per suite.")
@click.option("--seed", type=int, default=None)
@click.option("--mutate", default=None, help="Tighten one named check (smoke test of the gate).")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None)
def verify(suite, count, seed, mutate, out, config_path):
    """Run the randomized invariant suites; nonzero exit on any violation."""
    suites = list(SUITES) if suite == "all" else [suite]
    _run("verify", config_path=config_path, suites=suites, count=count, seed=seed, mutate=mutate, out=out)


@main.command()
@common
def moments(**kw):
    """Exact mean/variance report (JSON), or a CSV sweep when --T lists several values."""
    _run("moments", **kw)


@main.command()
@common
def test(**kw):
    """One simulated test: measure once, apply the Chebyshev rule."""
    _run("test", **kw)


@main.command()
@common
@click.option("--far-factor", type=float, default=None, help="Far instances sit at mu = far_factor * theta.")
@click.option("--workers", type=int, default=None)
def power(**kw):
    """Monte Carlo null/far rejection rates with Wilson intervals (CSV)."""
    _run("power", **kw)


@main.command()
@common
def divergence(**kw):
    """Quantum and classical divergences between --states and --sigma (first state of each)."""
    _run("divergence", **kw)


if __name__ == "__main__":
    main()
