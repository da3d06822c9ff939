"""Command line entry point.

``lindyn run CONFIG`` executes every task listed in the config. The task
subcommands (``classify``, ``density``, ``construct``, ``measure``,
``transfer``) run a single task, either from a config file or from flags
alone. Exit status: 0 success, 1 a task failed, 2 invalid configuration.
"""
from __future__ import annotations

import argparse
import sys

from .config import ExperimentConfig, load_config, parse_config
from .errors import ConfigError
from .runner import canonical_json, run_experiment

SUBCOMMAND_TASK = {"classify": "classify", "density": "densities", "construct": "construct",
                   "measure": "measure", "transfer": "transfer", "lbo": "lbo"}


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--horizon", help="largest time n examined (integer or 2^k)")
    p.add_argument("--eps-grid", help="comma-separated radii, e.g. 2^-1,2^-2")
    p.add_argument("--k0-grid", help="comma-separated seminorm indices")
    p.add_argument("--J", dest="J", help="certificate length")
    p.add_argument("--K", dest="K", help="number of seminorms reported")
    p.add_argument("--n-min", help="smallest window length of density grids")
    p.add_argument("--growth", help="growth bound for lbo acceptance: none, j, const:c, poly:d")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("json", "csv"), action="append",
                   help="output format (repeatable; default from config)")
    p.add_argument("--seed", help="seed for randomized functional probes")
    fig = p.add_mutually_exclusive_group()
    fig.add_argument("--figures", dest="figures", action="store_true", default=None,
                     help="render PNG figures next to the reports")
    fig.add_argument("--no-figures", dest="figures", action="store_false")
    p.add_argument("--print", action="store_true", help="also print the canonical JSON report")


def _add_experiment_flags(p: argparse.ArgumentParser):
    p.add_argument("config", nargs="?", help="optional INI config used as the base")
    p.add_argument("--space", choices=("omega", "kothe", "entire"))
    p.add_argument("--operator", choices=("backward_shift", "diagonal", "birkhoff", "maclane", "diffop"))
    p.add_argument("--a", help="translation for the birkhoff operator")
    p.add_argument("--lambdas", help="diagonal entries (cycled)")
    p.add_argument("--weights", help="backward shift weights")
    p.add_argument("--phi", help="coefficients of phi for diffop")
    p.add_argument("--vector", help="inline vector values, cycled to the needed length")
    p.add_argument("--construction", choices=("word_embedding", "star_recurrent"))
    p.add_argument("--seed-word", help="positive seed for word_embedding")
    p.add_argument("--rounds", help="rounds for word_embedding")
    p.add_argument("--use", choices=("y", "z"), help="which word-embedding vector to analyse")
    p.add_argument("--k-max", help="k_max for star_recurrent")
    p.add_argument("--witness", help="transfer witness: naturals, star:L or a list")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lindyn", description="Finite-horizon linear dynamics experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run every task of a config file")
    run.add_argument("config")
    _add_common(run)
    for name, task in SUBCOMMAND_TASK.items():
        p = sub.add_parser(name, help=f"run the {task} task")
        _add_experiment_flags(p)
        _add_common(p)
    return parser


def _overrides(args) -> dict:
    g = lambda name: getattr(args, name, None)  # noqa: E731
    ov = {
        ("grids", "horizon"): g("horizon"), ("grids", "eps"): g("eps_grid"), ("grids", "k0"): g("k0_grid"),
        ("grids", "J"): g("J"), ("grids", "K"): g("K"), ("grids", "N_min"): g("n_min"),
        ("grids", "growth"): g("growth"), ("output", "dir"): g("out"), ("experiment", "seed"): g("seed"),
        ("space", "variant"): g("space"), ("operator", "variant"): g("operator"),
        ("operator", "a"): g("a"), ("operator", "lambdas"): g("lambdas"), ("operator", "weights"): g("weights"),
        ("operator", "phi"): g("phi"), ("transfer", "witness"): g("witness"),
    }
    if g("format"):
        ov[("output", "formats")] = ",".join(g("format"))
    if g("figures") is not None:
        ov[("output", "figures")] = "yes" if g("figures") else "no"
    if g("vector"):
        ov.update({("vector", "source"): "inline", ("vector", "values"): g("vector"),
                   ("vector", "repeat"): "auto"})
    if g("construction"):
        ov.update({("vector", "source"): "construction", ("vector", "construction"): g("construction"),
                   ("vector", "seed"): g("seed_word"), ("vector", "rounds"): g("rounds"),
                   ("vector", "use"): g("use"), ("vector", "k_max"): g("k_max")})
    return ov


def make_config(args) -> ExperimentConfig:
    ov = _overrides(args)
    if args.command != "run":
        ov[("experiment", "tasks")] = SUBCOMMAND_TASK[args.command]
    if args.config:
        return load_config(args.config, ov)
    if args.command != "run" and not (args.vector or args.construction):
        raise ConfigError("give a config file, --vector or --construction", section="vector")
    cfg = parse_config("", overrides=ov)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = make_config(args)
        result = run_experiment(cfg, out_dir=args.out)
    except ConfigError as exc:
        print(f"lindyn: config error: {exc}", file=sys.stderr)
        return 2
    if args.print:
        sys.stdout.write(canonical_json(result.report))
    for name, task in result.report["tasks"].items():
        print(f"{name}: {task['status']}" + (f" ({task['error']['message']})" if task["status"] != "ok" else ""))
    print(f"reports written to {result.out_dir}")
    return result.status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
