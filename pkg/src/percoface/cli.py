"""Command-line front door.

Subcommands: simulate, oracle, experiment, validate, emit-schema.  Exit codes
are fixed for scripting: 0 success, 1 usage/configuration error (usage text on
stderr), 2 runtime failure.  Every run that writes outputs also writes a
manifest beside them.  Config files are flat ``key = value`` documents; any
flag given explicitly wins over the file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .dynamics import History, RngStream, init_state, run
from .errors import PercofaceError
from .experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    emit_schemas,
    run_experiment,
    run_from_manifest,
    write_outputs,
)
from .lattice import build_box
from .oracle import exact_stationary, stationary_chain_check

OUT_DIR_ENV = "PERCOFACE_OUT"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


_CONFIG_TYPES = {
    "experiment": str, "d": int, "L": int, "p": float, "seed": int,
    "replicas": int, "samples": int, "burn_multiplier": float, "cadence": int,
    "window_sweeps": int, "trials": int, "span_max": int, "jobs": int,
    "out_dir": str,
    "ell_grid": lambda s: tuple(float(x) for x in s.split()),
    "s_grid": lambda s: tuple(int(x) for x in s.split()),
}


def load_config_file(path: str) -> dict:
    """Parse a flat key = value config document; '#' starts a comment."""
    if not os.path.exists(path):
        raise UsageError(f"config file not found: {path}")
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _CONFIG_TYPES:
                raise UsageError(f"{path}:{lineno}: unknown field {key!r}")
            try:
                out[key] = _CONFIG_TYPES[key](value)
            except ValueError as exc:
                raise UsageError(f"{path}:{lineno}: field {key!r}: {exc}") from exc
    return out


def _build_parser() -> _Parser:
    parser = _Parser(prog="percoface", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the coupled chain and dump the event log")
    _common_flags(sim)
    sim.add_argument("--steps", type=int, default=10000)
    sim.add_argument("--window", type=int, default=0, help="history window (0: steps)")

    orc = sub.add_parser("oracle", help="exact small-box checks")
    orc.add_argument("--check", choices=("stationary", "empirical"), required=True)
    _common_flags(orc)
    orc.add_argument("--steps", type=int, default=100000)

    exp = sub.add_parser("experiment", help="run a measurement experiment")
    _common_flags(exp)
    exp.add_argument("--name", choices=EXPERIMENTS)
    exp.add_argument("--config", help="config file (flags win over file values)")
    exp.add_argument("--from-manifest", dest="manifest", help="reproduce a previous run")
    exp.add_argument("--replicas", type=int)
    exp.add_argument("--samples", type=int)
    exp.add_argument("--trials", type=int)
    exp.add_argument("--jobs", type=int)

    val = sub.add_parser("validate", help="schema-check a config file")
    val.add_argument("config")

    sub.add_parser("emit-schema", help="print the CSV/JSON schemas")
    return parser


def _common_flags(p):
    p.add_argument("-d", type=int, default=None)
    p.add_argument("-L", type=int, default=None)
    p.add_argument("-p", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help=f"output directory (default ${OUT_DIR_ENV} or .)")
    p.add_argument("-v", "--verbose", action="store_true")


def _out_dir(args) -> str:
    return args.out or os.environ.get(OUT_DIR_ENV) or "."


def _cmd_simulate(args) -> int:
    d = args.d if args.d is not None else 2
    L = args.L if args.L is not None else 8
    p = args.p if args.p is not None else 0.95
    seed = args.seed if args.seed is not None else 0
    lattice = build_box(d, L)
    rng = RngStream(seed)
    state = init_state(lattice, p, rng)
    window = args.window or args.steps
    history = History(state, window=window, snapshot_every=lattice.n_edges)
    summary = run(state, args.steps, rng, history=history)
    out = _out_dir(args)
    os.makedirs(out, exist_ok=True)
    stem = os.path.join(out, f"simulate_{d}d_L{L}_p{p}_seed{seed}")
    with open(stem + ".events", "w") as fh:
        history.dump_events(fh)
    manifest = {
        "command": "simulate", "d": d, "L": L, "p": p, "seed": seed,
        "steps": args.steps, "rng_algorithm": rng.algorithm,
        "package_version": __version__,
        "outcomes": summary.outcomes,
    }
    with open(stem + "_manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.verbose:
        print(f"ran {args.steps} steps: {summary.outcomes}")
    print(stem + ".events")
    return 0


def _cmd_oracle(args) -> int:
    d = args.d if args.d is not None else 2
    L = args.L if args.L is not None else 1
    p = args.p if args.p is not None else 0.9
    lattice = build_box(d, L)
    if args.check == "stationary":
        res = exact_stationary(lattice, p)
        print(f"states={len(res.pairs)} residual={res.residual:.3e} "
              f"y_marginal_tv={res.y_marginal_tv:.3e} x_marginal_tv={res.x_marginal_tv:.3e}")
        ok = res.y_marginal_tv < 1e-10 and res.x_marginal_tv < 1e-10
        print("PASS" if ok else "FAIL")
        return 0 if ok else 2
    seed = args.seed if args.seed is not None else 0
    report = stationary_chain_check(lattice, p, args.steps, seed)
    print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
    return 0 if report.valid and report.passed else 2


def _cmd_experiment(args) -> int:
    if args.manifest:
        result = run_from_manifest(args.manifest, out_dir=args.out)
        print(result["paths"]["csv"])
        return 0
    fields = {}
    if args.config:
        fields.update(load_config_file(args.config))
    overrides = {
        "experiment": args.name, "d": args.d, "L": args.L, "p": args.p,
        "seed": args.seed, "replicas": args.replicas, "samples": args.samples,
        "trials": args.trials, "jobs": args.jobs,
    }
    for key, value in overrides.items():
        if value is not None:
            fields[key] = value
    if "experiment" not in fields:
        raise UsageError("an experiment name is required (--name or config file)")
    cfg = ExperimentConfig(**fields)
    result = run_experiment(cfg, out_dir=_out_dir(args))
    print(result["paths"]["csv"])
    if args.verbose:
        print(json.dumps(result["summary"], indent=2, sort_keys=True, default=str))
    return 0


def _cmd_validate(args) -> int:
    fields = load_config_file(args.config)
    if "experiment" not in fields:
        raise UsageError(f"{args.config}: missing required field 'experiment'")
    try:
        cfg = ExperimentConfig(**fields)
    except PercofaceError as exc:
        raise UsageError(f"{args.config}: {exc}") from exc
    normalized = cfg.as_dict()
    normalized["effective_cadence"] = cfg.effective_cadence()
    normalized["effective_ell_grid"] = list(cfg.effective_ell_grid())
    print(json.dumps(normalized, indent=2, sort_keys=True))
    return 0


def parse_and_dispatch(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
        if args.command == "experiment":
            return _cmd_experiment(args)
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "emit-schema":
            print(json.dumps(emit_schemas(), indent=2, sort_keys=True))
            return 0
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except PercofaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(parse_and_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
