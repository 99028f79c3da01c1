"""Command line entry point.

Subcommands: ``train``, ``allocate``, ``simulate``, ``sweep``, ``verify-ber``.
Exit status is 0 on success, 2 on configuration errors and 3 when the
requested link budget or rate cannot be met.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .. import allocator
from ..allocator import InfeasibleRateError, LinkBudget
from ..ber_model import InfeasibleTargetError, ber
from ..data import make_toy_images
from ..phy import monte_carlo_ber
from ..trainer import TrainConfig, load_bundle, save_bundle, train_ladder
from ..trainer.bundle_io import BundleFormatError
from . import pipeline
from .config import ConfigError, load_config, parse_float_list

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3

# ladders used when only --k is given
DEFAULT_LADDERS = {
    1: (1e-6,),
    2: (1e-6, 1e-3),
    3: (1e-6, 1e-3, 1e-2),
    4: (1e-6, 1e-4, 1e-3, 1e-2),
}

TRAIN_SEED_OFFSET = 1
TEST_SEED_OFFSET = 2


def _count(text) -> int:
    value = float(text)
    if value != int(value) or value < 1:
        raise ValueError(f"expected a positive integer, got {text!r}")
    return int(value)


def _method(text) -> str:
    text = str(text).lower()
    if text not in allocator.METHODS:
        raise ValueError(f"method must be one of {allocator.METHODS}")
    return text


# name -> (converter, default); None default means required when used
OPTIONS = {
    "seed": (int, 0),
    "k": (int, None),
    "lambdas": (parse_float_list, None),
    "tau": (float, 1.0),
    "epochs": (int, 60),
    "out": (str, None),
    "bundle": (str, None),
    "snr_grid": (parse_float_list, (0.0, 5.0, 10.0, 15.0, 20.0)),
    "snr": (float, 10.0),
    "ptot": (float, 100.0),
    "rtarget": (float, 4.0),
    "gamma": (float, 1.0),
    "method": (_method, allocator.AMPC),
    "trials": (_count, 100),
    "bits": (_count, 1_000_000),
    "m": (int, None),
    "p": (float, None),
    "n_train": (_count, 2000),
    "n_test": (_count, 500),
    "images_per_block": (_count, 1),
}

COMMANDS = {
    "train": ("k", "lambdas", "tau", "epochs", "seed", "out", "n_train"),
    "allocate": ("bundle", "ptot", "rtarget", "gamma", "method", "out"),
    "simulate": ("bundle", "ptot", "rtarget", "snr", "method", "trials", "seed", "out",
                 "n_test", "images_per_block"),
    "sweep": ("bundle", "snr_grid", "ptot", "rtarget", "method", "trials", "seed", "out",
              "n_test", "images_per_block"),
    "verify-ber": ("m", "p", "gamma", "bits", "seed"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flipadapt", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in COMMANDS.items():
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", help="key=value file; flags override its values")
        for opt in opts:
            cmd.add_argument("--" + opt.replace("_", "-"), dest=opt, default=None)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge built-in defaults, config file values and explicit flags (in that order)."""
    file_values = load_config(args.config) if args.config else {}
    allowed = COMMANDS[args.command]
    unknown = set(file_values) - set(allowed)
    if unknown:
        raise ConfigError(f"config keys not valid for {args.command}: {sorted(unknown)}")
    out = {}
    for opt in allowed:
        convert, default = OPTIONS[opt]
        raw = getattr(args, opt)
        if raw is None:
            raw = file_values.get(opt)
        if raw is None:
            out[opt] = default
            continue
        try:
            out[opt] = convert(raw)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"--{opt.replace('_', '-')}: {exc}") from None
    return out


def _require(opts, *names):
    missing = [n for n in names if opts.get(n) is None]
    if missing:
        raise ConfigError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def cmd_train(o) -> int:
    _require(o, "out")
    lambdas = o["lambdas"]
    if lambdas is None:
        k = o["k"] or 3
        if k not in DEFAULT_LADDERS:
            raise ConfigError(f"no default ladder for K={k}; pass --lambdas")
        lambdas = DEFAULT_LADDERS[k]
    elif o["k"] is not None and o["k"] != len(lambdas):
        raise ConfigError(f"--k {o['k']} does not match {len(lambdas)} lambdas")
    try:
        config = TrainConfig(lambdas=lambdas, tau=o["tau"], epochs=o["epochs"], seed=o["seed"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    data = make_toy_images(o["n_train"], seed=o["seed"] + TRAIN_SEED_OFFSET)
    bundle = train_ladder(data, config)
    save_bundle(bundle, o["out"])
    for e in bundle.entries:
        print(f"lambda={e.lam:g} mean_mu={e.mu.mu.mean():.4f}")
    print(f"bundle written to {o['out']}")
    return EXIT_OK


def _load(o):
    _require(o, "bundle")
    try:
        return load_bundle(o["bundle"])
    except (OSError, BundleFormatError) as exc:
        raise ConfigError(f"cannot load bundle: {exc}") from None


def cmd_allocate(o) -> int:
    bundle = _load(o)
    budget = LinkBudget(o["ptot"], o["rtarget"], o["gamma"])
    plan = allocator.select_pair(bundle, budget, o["method"])
    summary = allocator.plan_summary(plan)
    if o["out"]:
        out = Path(o["out"])
        out.mkdir(parents=True, exist_ok=True)
        allocator.write_plan_csv(plan, out / "plan.csv")
        allocator.write_plan_summary(plan, out / "summary.json")
    print(json.dumps(summary))
    return EXIT_OK


def _test_data(o, bundle):
    data = make_toy_images(o["n_test"], seed=bundle.seed + TEST_SEED_OFFSET)
    if data.shape[1] != bundle.input_dim:
        raise ConfigError("bundle input size does not match the toy dataset")
    return data


def cmd_simulate(o) -> int:
    bundle = _load(o)
    eg = pipeline.expected_gamma_for(o["snr"], o["ptot"], bundle.n_bits)
    budget = LinkBudget(o["ptot"], o["rtarget"], eg)
    report = pipeline.run_simulate(
        bundle, budget, _test_data(o, bundle), o["trials"], o["seed"], o["method"], o["images_per_block"]
    )
    if not report.feasible:
        print(report.blocks[0].reason, file=sys.stderr)
        return EXIT_INFEASIBLE
    row = {
        "snr_max_db": o["snr"],
        "mean_psnr": report.mean_psnr,
        "psnr_std_error": report.psnr_std_error,
        "mean_p_sum": report.mean_p_sum,
        "mean_k_star": report.mean_k_star,
        "scaled_fraction": report.scaled_fraction,
        "infeasible": report.trials - len(report.feasible),
    }
    if o["out"]:
        with open(o["out"], "w") as fh:
            fh.write("trial,gamma,k_star,p_sum,psnr,scaled\n")
            for i, b in enumerate(report.blocks):
                fh.write(f"{i},{b.gamma!r},{b.k_star},{b.p_sum!r},{b.psnr!r},{int(b.scaled)}\n")
    print(json.dumps(row))
    return EXIT_OK


def cmd_sweep(o) -> int:
    bundle = _load(o)
    spec = pipeline.SweepSpec(
        o["snr_grid"], o["ptot"], o["rtarget"], o["trials"], o["seed"], o["bundle"], o["method"],
        o["images_per_block"],
    )
    rows = pipeline.run_sweep(spec, bundle, _test_data(o, bundle))
    if o["out"]:
        pipeline.write_sweep_csv(rows, o["out"])
    for row in rows:
        print(json.dumps(row))
    return EXIT_OK


def cmd_verify_ber(o) -> int:
    _require(o, "m", "p")
    estimate, se = monte_carlo_ber(o["p"], o["m"], o["gamma"], o["bits"], seed=o["seed"])
    model = ber(o["p"], o["m"], o["gamma"])
    print(json.dumps({"estimate": estimate, "std_error": se, "model": model}))
    return EXIT_OK


HANDLERS = {
    "train": cmd_train,
    "allocate": cmd_allocate,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "verify-ber": cmd_verify_ber,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return HANDLERS[args.command](resolve(args))
    except (InfeasibleRateError, InfeasibleTargetError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
