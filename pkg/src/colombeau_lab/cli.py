"""Command line entry point: ``colombeau-lab run|registry|describe``.

Exit codes: 0 when the experiment verdict is PASS, 2 for FAIL, 1 for errors
(bad config, unknown experiment, numerical failure).
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time

from .config import ConfigError, load_config
from .experiments import registry, registry_config, write_outputs, run_config

log = logging.getLogger("colombeau_lab")


def _apply_overrides(cfg, args):
    if args.seed is not None:
        cfg.seed = args.seed
    if args.eps_max is not None:
        cfg.eps.k_min = math.ceil(-math.log2(args.eps_max) - 1e-12)
    if args.eps_min is not None:
        cfg.eps.k_max = math.floor(-math.log2(args.eps_min) + 1e-12)
    if cfg.eps.k_max - cfg.eps.k_min < 3:
        raise ConfigError("eps", "the eps range must contain at least 4 dyadic values")
    return cfg


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="colombeau-lab", description="Numerical laboratory for nonlinear "
                                 "generalized tensor fields.")
    ap.add_argument("--verbose", "-v", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment from a config file or the registry")
    run.add_argument("name", nargs="?", help="registry name")
    run.add_argument("--config", help="YAML config file")
    run.add_argument("--out", default="out", help="output directory (report.json, rates.csv)")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--seed", type=int)
    run.add_argument("--eps-min", type=float)
    run.add_argument("--eps-max", type=float)
    run.add_argument("--verbose", "-v", action="store_true")
    sub.add_parser("registry", help="list canonical experiments")
    d = sub.add_parser("describe", help="print the config of a canonical experiment as YAML")
    d.add_argument("name")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "registry":
            for name, raw in registry().items():
                print(f"{name:16s} {raw['kind']:18s} {raw.get('description', '')}")
            return 0
        if args.command == "describe":
            print(registry_config(args.name).dump(), end="")
            return 0
        if bool(args.config) == bool(args.name):
            raise ConfigError("<args>", "give exactly one of --config or a registry name")
        cfg = load_config(args.config) if args.config else registry_config(args.name)
        cfg = _apply_overrides(cfg, args)
        log.info("running %s (%s)", cfg.name, cfg.kind)
        t0 = time.perf_counter()
        result = run_config(cfg, max(1, args.threads))
        jp, cp = write_outputs(cfg, result, args.out, time.perf_counter() - t0)
    except (ConfigError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # numerical breakdowns surface as exit code 1
        log.debug("failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"{cfg.name}: {'PASS' if result.passed else 'FAIL'}  ({jp}, {cp})")
    return 0 if result.passed else 2


if __name__ == "__main__":
    sys.exit(main())
