"""Command line entry point.

    vortexlab pv run    [--config PATH] [--seed U64] [--out DIR]
    vortexlab gp run    ...
    vortexlab euler run ...
    vortexlab sample    ...
    vortexlab norms     ...
    vortexlab report    --out DIR

Exit codes: 0 success, 2 hypothesis verification failed, 1 any other error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import HypothesisError
from .io import dump_json

log = logging.getLogger("vortexlab")

# subcommand -> (default scenario, scenarios it accepts)
COMMANDS = {
    "pv": ("pv_trajectory", ("pv_trajectory", "hydrodynamic")),
    "gp": ("gp_vs_ode", ("gp_vs_ode",)),
    "euler": ("euler_suite", ("euler_suite", "hydrodynamic")),
    "sample": ("sampler_stats", ("sampler_stats",)),
    "norms": ("norms_suite", ("norms_suite",)),
}


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _common(p):
    p.add_argument("--config", metavar="PATH", help="JSON experiment config")
    p.add_argument("--seed", type=_u64, metavar="U64", help="override the config seed")
    p.add_argument("--out", metavar="DIR", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vortexlab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("pv", "gp", "euler"):
        sp = sub.add_parser(name, help=f"{name} scenarios")
        inner = sp.add_subparsers(dest="action", required=True)
        _common(inner.add_parser("run", help="run a scenario"))
    for name in ("sample", "norms"):
        _common(sub.add_parser(name, help=f"{COMMANDS[name][0]} scenario"))
    rp = sub.add_parser("report", help="verify a run directory and summarise it")
    _common(rp)
    return ap


def _report(out) -> int:
    from .experiments import verify_manifest

    man, bad = verify_manifest(out)
    summary = {"scenario": man.scenario, "status": man.status, "flags": man.flags,
               "gamma": man.gamma, "gamma_error": man.gamma_error, "scales": man.scales,
               "results": man.results, "files": len(man.files), "hash_mismatches": bad}
    text = dump_json(summary)
    sys.stdout.write(text)
    if bad:
        log.error("hash mismatch for %s", ", ".join(bad))
        return 1
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    from .experiments import ConfigError, load_config, run_experiment

    try:
        if args.command == "report":
            if not args.out:
                log.error("report needs --out DIR")
                return 1
            return _report(args.out)
        default, allowed = COMMANDS[args.command]
        doc = load_config(args.config) if args.config else {"scenario": default}
        if doc.get("scenario") not in allowed:
            log.error("scenario %r is not run by '%s'; expected one of %s",
                      doc.get("scenario"), args.command, ", ".join(allowed))
            return 1
        if args.seed is not None:
            doc["seed"] = args.seed
        man = run_experiment(doc, args.out)
        sys.stdout.write(json.dumps({"status": man.status, "out": man.config["out"],
                                     "results": man.results}, default=str) + "\n")
        return 0
    except HypothesisError as exc:
        log.error("hypothesis verification failed: %s", exc)
        return 2
    except ConfigError as exc:
        log.error("%s", exc)
        return 1
    except Exception as exc:  # noqa: BLE001 - the CLI maps every failure to exit 1
        log.error("%s: %s", type(exc).__name__, exc)
        if args.verbose:
            raise
        return 1


if __name__ == "__main__":
    sys.exit(main())
