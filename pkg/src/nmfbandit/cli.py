"""Command-line entry point.

Subcommands: generate (write instance files), run, sweep, check-rip,
summarize. Exit codes: 0 ok, 2 configuration/parse error, 3 numeric or
recovery error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .errors import NmfBanditError, NumericError


def _add_common(parser):
    parser.add_argument("--config", help="JSON config file (defaults otherwise)")
    parser.add_argument("--seed", type=int, help="replace the seed list with one seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--policy", help="run only this policy")
    parser.add_argument("--T", type=int, help="horizon override")
    parser.add_argument("--threads", type=int, help="parallel cells (env NMFBANDIT_THREADS)")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="nmfbandit",
        description="Latent contextual bandit experiments with NMF-based policies",
    )
    parser.add_argument(
        "--print-config",
        action="store_true",
        help="dump the fully defaulted configuration as JSON and exit",
    )
    sub = parser.add_subparsers(dest="command")
    for name, help_text in [
        ("generate", "write the configured instance as CSV + meta JSON"),
        ("run", "run the configured experiment"),
        ("sweep", "grid over nmf_bandit theta/m' values"),
        ("check-rip", "factor-quality report for the configured instance"),
        ("summarize", "print a results table from an output directory"),
    ]:
        p = sub.add_parser(name, help=help_text)
        if name == "summarize":
            p.add_argument("--in", dest="in_dir", required=True, help="experiment directory")
        else:
            _add_common(p)
    return parser


def _config_from(args):
    overrides = {}
    if args.seed is not None:
        overrides["seeds"] = [args.seed]
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.policy is not None:
        overrides["policies"] = [args.policy]
    if args.T is not None:
        overrides["T"] = args.T
    cfg = harness.load_config(args.config, overrides)
    cfg["threads"] = harness.thread_count(args.threads)
    return cfg


def _cmd_generate(args):
    cfg = _config_from(args)
    inst = harness.build_instance(cfg)
    out = Path(cfg["out_dir"])
    csv_path, meta_path = harness.write_instance(inst, out / "U.csv")
    print(f"wrote {csv_path} and {meta_path} (L={inst.L}, K={inst.K}, gap={inst.gap:.6g})")


def _cmd_run(args):
    cfg = _config_from(args)
    summary = harness.run_experiment(cfg)
    for name, info in summary["policies"].items():
        print(
            f"{name}: mean final regret {info['mean_final_regret']:.4f} "
            f"(std {info['std_final_regret']:.4f}, {len(info['per_seed'])} seeds)"
        )
    print(f"traces and summary.json in {cfg['out_dir']}")


def _cmd_sweep(args):
    cfg = _config_from(args)
    results = harness.run_sweep(cfg)
    for row in results:
        cells = ", ".join(f"{k}={v:.2f}" for k, v in row["policies"].items())
        print(f"theta={row['theta']} m'={row['m_prime']}: {cells}")


def _cmd_check_rip(args):
    cfg = _config_from(args)
    report = harness.check_rip(cfg)
    print(json.dumps(report, indent=2))


def _cmd_summarize(args):
    path = Path(args.in_dir) / "summary.json"
    with open(path) as fh:
        summary = json.load(fh)
    print(f"{'policy':<12} {'mean regret':>12} {'std':>10} {'seeds':>6}")
    for name, info in summary["policies"].items():
        print(
            f"{name:<12} {info['mean_final_regret']:>12.4f} "
            f"{info['std_final_regret']:>10.4f} {len(info['per_seed']):>6}"
        )


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.print_config:
        print(json.dumps(harness.default_config(), indent=2))
        return 0
    if args.command is None:
        parser.print_help()
        return 0
    handlers = {
        "generate": _cmd_generate,
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "check-rip": _cmd_check_rip,
        "summarize": _cmd_summarize,
    }
    try:
        handlers[args.command](args)
    except NumericError as err:
        print(f"numeric error: {err}", file=sys.stderr)
        return 3
    except (NmfBanditError, FileNotFoundError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
